#include "support/fixtures.hpp"
#include "support/oracle.hpp"

#include <sketchd/engine/engine.hpp>
#include <sketchd/eval_annotated.hpp>

#include <gtest/gtest.h>


using namespace sketchd;

namespace {

AnnotatedDeltaDatabase single(const std::string &rel, const Schema &s, AnnotatedTuple a)
{
    AnnotatedDeltaDatabase d;
    d.emplace(rel, AnnotatedDelta{s, {std::move(a)}});
    return d;
}

std::map<std::pair<Tuple, Sketch>, std::int64_t> net(const AnnotatedDelta &d)
{
    std::map<std::pair<Tuple, Sketch>, std::int64_t> out;
    for (const auto &a : d.rows) out[{a.tuple, a.sketch}] += a.signed_multiplicity();
    std::erase_if(out, [](const auto &e) { return e.second == 0; });
    return out;
}

Tuple row(std::initializer_list<Value> vs) { return Tuple(vs); }

}

TEST(MergeRule, FinalFragmentDropsOut)
{
    MergeState m(2);
    m.add(Sketch{0}, 1);
    m.add(Sketch{1}, 3);
    m.refresh();
    ASSERT_EQ(m.current, (Sketch{0, 1}));
    AnnotatedDelta d{Schema("q", {{"x", Kind::i64}}), {{row({3}), Sketch{0, 1}, 1, DeltaTag::remove}}};
    SketchDelta dp = m.step(d);
    EXPECT_EQ(dp.inserts, Sketch());
    EXPECT_EQ(dp.deletes, Sketch{0});
    EXPECT_EQ(m.counts, (std::vector<std::int64_t>{0, 2}));
    EXPECT_EQ(sketch_apply_delta(Sketch{0, 1}, dp), Sketch{1});
}

TEST(MergeRule, NegativeCountIsInconsistent)
{
    MergeState m(1);
    AnnotatedDelta d{Schema("q", {{"x", Kind::i64}}), {{row({3}), Sketch{0}, 1, DeltaTag::remove}}};
    EXPECT_THROW(m.step(d), inconsistent_delta);
}

TEST(RunningExample, CaptureAndInsert)
{
    auto [st, s] = init_state(fixtures::q_top(), DatabaseSource(fixtures::sales_db()), fixtures::price_catalog(),
                              EngineConfig::exact());
    EXPECT_EQ(s, (Sketch{2, 3}));
    EXPECT_EQ(st.merge().counts, (std::vector<std::int64_t>{0, 0, 1, 1}));

    DeltaTrace trace;
    auto delta = single("sales", fixtures::sales_schema(), {fixtures::s8(), Sketch{2}, 1, DeltaTag::insert});
    SketchDelta dp = process_delta(st, delta, DatabaseSource(fixtures::sales_db()), &trace);
    EXPECT_EQ(dp.inserts, Sketch{1});
    EXPECT_EQ(dp.deletes, Sketch());
    EXPECT_EQ(st.sketch(), (Sketch{1, 2, 3}));

    // node ids: merge 0, select 1, aggregate 2, project 3, table 4
    auto agg = net(trace[2]);
    ASSERT_EQ(agg.size(), 2u);
    EXPECT_EQ(agg.at({row({"HP", 4895}), Sketch{1}}), -1);
    EXPECT_EQ(agg.at({row({"HP", 6194}), Sketch{1, 2}}), 1);
    auto root = net(trace[0]);
    ASSERT_EQ(root.size(), 1u);
    EXPECT_EQ(root.begin()->first.first, row({"HP", 6194}));
}

TEST(RunningExample, TableAccessPassesDeltaThrough)
{
    auto [st, s] = init_state(table("sales"), DatabaseSource(fixtures::sales_db()), fixtures::price_catalog());
    DeltaTrace trace;
    AnnotatedTuple a{fixtures::s8(), Sketch{2}, 1, DeltaTag::insert};
    process_delta(st, single("sales", fixtures::sales_schema(), a), DatabaseSource(fixtures::sales_db()), &trace);
    ASSERT_EQ(trace[1].rows.size(), 1u);
    EXPECT_EQ(trace[1].rows[0], a);
    EXPECT_TRUE(process_delta(st, {}, DatabaseSource(fixtures::sales_db())).empty());
}

TEST(AllRules, InsertFlowsThroughEveryOperator)
{
    Database db = fixtures::rules_db();
    auto [st, s] = init_state(fixtures::rules_query(), DatabaseSource(db), fixtures::rules_catalog(),
                              EngineConfig::exact());
    // f2 = 1 and g1 = 2
    EXPECT_EQ(s, (Sketch{1, 2}));

    DeltaTrace trace;
    Schema r = db.at("R").schema;
    SketchDelta dp = process_delta(st, single("R", r, {row({5, 8}), Sketch{0}, 1, DeltaTag::insert}),
                                   DatabaseSource(db), &trace);
    // ids: merge 0, having 1, aggregate 2, join 3, select 4, R 5, S 6
    ASSERT_EQ(trace[4].rows.size(), 1u);
    EXPECT_EQ(trace[4].rows[0].tuple, row({5, 8}));
    EXPECT_EQ(net(trace[3]), (std::map<std::pair<Tuple, Sketch>, std::int64_t>{{{row({5, 8, 7, 8}), Sketch{0, 3}}, 1}}));
    EXPECT_EQ(net(trace[2]), (std::map<std::pair<Tuple, Sketch>, std::int64_t>{{{row({5, 7}), Sketch{0, 3}}, 1}}));
    EXPECT_EQ(net(trace[1]), net(trace[2]));
    EXPECT_EQ(dp.inserts, (Sketch{0, 3}));
    EXPECT_EQ(dp.deletes, Sketch());
}

TEST(AggregateRule, MinFallsBackToNextValue)
{
    Database db;
    BagRelation t(Schema("T", {{"g", Kind::i64}, {"v", Kind::i64}}));
    t.add(row({1, 3}), 1);
    t.add(row({1, 5}), 2);
    db.add(t);
    PartitionCatalog cat;
    cat.add(RangePartition("T", "v", {Value(0), Value(4), Value(10)}));
    Plan q = aggregate(table("T"), {"g"}, {{AggFn::min, "v", "m"}});
    for (auto config : {EngineConfig::exact(), EngineConfig{}}) {
        auto [st, s] = init_state(q, DatabaseSource(db), cat, config);
        DeltaTrace trace;
        process_delta(st, single("T", t.schema, {row({1, 3}), Sketch{0}, 1, DeltaTag::remove}), DatabaseSource(db),
                      &trace);
        auto d = net(trace[1]);
        ASSERT_EQ(d.size(), 2u);
        EXPECT_EQ(d.at({row({1, 3}), Sketch{0, 1}}), -1);
        EXPECT_EQ(d.at({row({1, 5}), Sketch{1}}), 1);
        EXPECT_EQ(st.sketch(), Sketch{1});
    }
}

TEST(AggregateRule, BoundedMinMaxAsksForRecapture)
{
    Database db;
    BagRelation t(Schema("T", {{"g", Kind::i64}, {"v", Kind::i64}}));
    for (int v = 0; v != 10; ++v) t.add(row({1, v}));
    db.add(t);
    PartitionCatalog cat;
    cat.add(RangePartition("T", "v", {Value(0), Value(5), Value(10)}));
    EngineConfig config;
    config.minmax_buffer = 2;
    auto [st, s] = init_state(aggregate(table("T"), {"g"}, {{AggFn::max, "v", "m"}}), DatabaseSource(db), cat, config);
    process_delta(st, single("T", t.schema, {row({1, 9}), Sketch{1}, 1, DeltaTag::remove}), DatabaseSource(db));
    Database d1 = apply_delta(db, DeltaDatabase{{{"T", [&] { DeltaRelation r(t.schema); r.remove(row({1, 9})); return r; }()}}});
    EXPECT_THROW(process_delta(st, single("T", t.schema, {row({1, 8}), Sketch{1}, 1, DeltaTag::remove}),
                               DatabaseSource(d1)),
                 recapture_required);
}

TEST(TopKRule, DeletingTheTopPromotesTheNext)
{
    Database db;
    BagRelation t(Schema("T", {{"o", Kind::i64}, {"x", Kind::str}}));
    t.add(row({1, "t"}));
    t.add(row({2, "u"}));
    db.add(t);
    PartitionCatalog cat;
    cat.add(RangePartition("T", "o", {Value(0), Value(2), Value(10)}));
    auto [st, s] = init_state(top_k(table("T"), 1, {{"o", false}}), DatabaseSource(db), cat, EngineConfig::exact());
    EXPECT_EQ(s, Sketch{0});
    DeltaTrace trace;
    SketchDelta dp = process_delta(st, single("T", t.schema, {row({1, "t"}), Sketch{0}, 1, DeltaTag::remove}),
                                   DatabaseSource(db), &trace);
    EXPECT_EQ(net(trace[1]), (std::map<std::pair<Tuple, Sketch>, std::int64_t>{
                                 {{row({1, "t"}), Sketch{0}}, -1}, {{row({2, "u"}), Sketch{1}}, 1}}));
    EXPECT_EQ(dp.inserts, Sketch{1});
    EXPECT_EQ(dp.deletes, Sketch{0});
}

TEST(TopKRule, MultiplicitySplitsAtTheBoundary)
{
    Database db;
    BagRelation t(Schema("T", {{"o", Kind::i64}}));
    t.add(row({1}));
    db.add(t);
    PartitionCatalog cat;
    cat.add(RangePartition("T", "o", {Value(0), Value(10)}));
    auto [st, s] = init_state(top_k(table("T"), 2, {{"o", true}}), DatabaseSource(db), cat, EngineConfig::exact());
    DeltaTrace trace;
    process_delta(st, single("T", t.schema, {row({5}), Sketch{0}, 3, DeltaTag::insert}), DatabaseSource(db), &trace);
    auto d = net(trace[1]);
    EXPECT_EQ(d.at({row({5}), Sketch{0}}), 2);
    EXPECT_EQ(d.at({row({1}), Sketch{0}}), -1);
}

TEST(TopKRule, BufferSmallerThanKIsRejected)
{
    Database db;
    db.add(BagRelation(Schema("T", {{"o", Kind::i64}})));
    EngineConfig config;
    config.topk_buffer = 2;
    EXPECT_THROW(init_state(top_k(table("T"), 3, {{"o", false}}), DatabaseSource(db), {}, config), invalid_plan);
}

// Every combination of insert / delete / no change on both join inputs against the delta rule
// (L + dL) join (R + dR) - L join R, computed by the oracle over annotated bags.
TEST(JoinRule, TagTable)
{
    Schema ls("L", {{"k", Kind::i64}, {"x", Kind::i64}}), rs("R", {{"j", Kind::i64}, {"y", Kind::i64}});
    PartitionCatalog cat;
    cat.add(RangePartition("L", "x", {Value(0), Value(5), Value(10)}));
    cat.add(RangePartition("R", "y", {Value(0), Value(5), Value(10)}));
    Plan q = join(table("L"), table("R"), col("k") == col("j"));
    Database db;
    BagRelation l(ls), r(rs);
    l.add(row({1, 1}), 2);
    l.add(row({1, 7}));
    r.add(row({1, 2}));
    r.add(row({1, 8}), 3);
    db.add(l);
    db.add(r);

    enum Change { none, ins, del };
    for (Change cl : {none, ins, del})
        for (Change cr : {none, ins, del}) {
            DeltaDatabase delta;
            DeltaRelation dl(ls), dr(rs);
            if (cl == ins) dl.insert(row({1, 6}), 2);
            if (cl == del) dl.remove(row({1, 1}), 2);
            if (cr == ins) dr.insert(row({1, 3}), 3);
            if (cr == del) dr.remove(row({1, 8}), 1);
            delta.relations.emplace("L", dl);
            delta.relations.emplace("R", dr);
            Database post = apply_delta(db, delta);

            for (auto config : {EngineConfig::exact(), EngineConfig{}}) {
                auto [st, s] = init_state(q, DatabaseSource(db), cat, config);
                DeltaTrace trace;
                process_delta(st, annotate_delta(delta, cat), DatabaseSource(db), &trace);
                auto expected = oracle::run(q, annotate(post, cat)).rows;
                auto before = oracle::run(q, annotate(db, cat));
                for (const auto &[k, n] : before.rows) expected[k] -= n;
                std::erase_if(expected, [](const auto &e) { return e.second == 0; });
                EXPECT_EQ(net(trace[1]), expected) << "left " << cl << " right " << cr;
                EXPECT_EQ(st.sketch(), oracle::sketch(q, annotate(post, cat))) << "left " << cl << " right " << cr;
            }
        }
}

TEST(Capture, MergeCountsMatchResultTuples)
{
    Database db = fixtures::rules_db();
    auto [st, s] = init_state(fixtures::rules_query(), DatabaseSource(db), fixtures::rules_catalog());
    EXPECT_EQ(st.merge().counts, (std::vector<std::int64_t>{0, 1, 1, 0}));
    EXPECT_EQ(s, eval_sketch(fixtures::rules_query(), db, fixtures::rules_catalog()));
}
