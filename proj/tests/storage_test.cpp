#include "support/fixtures.hpp"
#include "support/oracle.hpp"

#include <sketchd/bloom.hpp>
#include <sketchd/pushdown.hpp>
#include <sketchd/store.hpp>

#include <gtest/gtest.h>

#include <random>
#include <sstream>
#include <thread>


using namespace sketchd;

namespace {

void load_sales(Store &s)
{
    s.create_table(fixtures::sales_schema());
    s.load(fixtures::sales());
}

DeltaDatabase batch(const Schema &schema, std::vector<std::pair<DeltaTag, Tuple>> rows)
{
    DeltaDatabase d;
    DeltaRelation r(schema);
    for (auto &[tag, t] : rows) r.rows.push_back({tag, std::move(t), 1});
    d.relations.emplace(schema.name, std::move(r));
    return d;
}

}

TEST(Store, VersionsAndSnapshots)
{
    Store s;
    load_sales(s);
    EXPECT_EQ(s.version(), 0u);
    EXPECT_EQ(s.scan_snapshot("sales", 0), fixtures::sales());
    EXPECT_EQ(s.commit(batch(fixtures::sales_schema(), {{DeltaTag::insert, fixtures::s8()}})), 1u);
    EXPECT_EQ(s.scan_snapshot("sales", 0).size(), 7);
    EXPECT_EQ(s.scan_snapshot("sales", 1).size(), 8);
    EXPECT_EQ(s.commit({}), 2u);
    EXPECT_EQ(s.scan_snapshot("sales", 2), s.scan_snapshot("sales", 1));
    EXPECT_THROW(s.scan_snapshot("sales", 3), unknown_version);
    EXPECT_THROW(s.load(fixtures::sales()), already_committed);
    EXPECT_THROW(s.create_table(fixtures::sales_schema()), duplicate_name);
    EXPECT_THROW(s.commit(batch(fixtures::sales_schema(), {{DeltaTag::remove, fixtures::sale(99, "x", "y", 5, 1)}})),
                 ill_formed_delta);
    EXPECT_EQ(s.version(), 2u);
    EXPECT_THROW(s.scan_snapshot("nope", 0), unknown_relation);
}

TEST(Store, EmptyLoadAndCsv)
{
    Store s;
    s.create_table(Schema("e", {{"a", Kind::i64}}));
    s.load_rows("e", {});
    EXPECT_TRUE(s.scan_snapshot("e", 0).empty());
    std::istringstream in("x:i64,y:str\n1,a\n2,b\n2,b\n");
    s.load_csv(in, "c");
    EXPECT_EQ(s.scan_snapshot("c", 0).multiplicity({Value(2), Value("b")}), 2);
}

TEST(Store, ScanEqualsFoldOfLog)
{
    std::mt19937_64 rng(21);
    Schema schema("r", {{"a", Kind::i64}, {"b", Kind::i64}});
    Store s;
    s.create_table(schema);
    std::map<Tuple, std::int64_t> cur;
    std::vector<Tuple> base;
    for (int i = 0; i != 3000; ++i) base.push_back({Value(std::int64_t(rng() % 50)), Value(std::int64_t(rng() % 7))});
    s.load_rows("r", base);
    for (const auto &t : base) ++cur[t];
    std::vector<std::map<Tuple, std::int64_t>> history{cur};
    for (int v = 1; v != 60; ++v) {
        DeltaRelation d(schema);
        for (int i = 0; i != 20; ++i) {
            if (rng() % 2 and not cur.empty()) {
                auto it = std::next(cur.begin(), static_cast<std::ptrdiff_t>(rng() % cur.size()));
                d.remove(it->first);
                if (--it->second == 0) cur.erase(it);
            } else {
                Tuple t{Value(std::int64_t(rng() % 50)), Value(std::int64_t(rng() % 7))};
                d.insert(t);
                ++cur[t];
            }
        }
        DeltaDatabase b;
        b.relations.emplace("r", d);
        // deletes are checked against the table before the batch
        try {
            s.commit(b);
        } catch (const ill_formed_delta&) {
            cur = history.back();
            s.commit({});
        }
        history.push_back(cur);
    }
    for (std::size_t v = 0; v < history.size(); v += 7) EXPECT_EQ(s.scan_snapshot("r", v).rows, history[v]) << v;
    EXPECT_EQ(s.scan_snapshot("r", s.version()).rows, history.back());
    // net extraction between any two versions
    for (std::size_t from = 0; from < history.size(); from += 11)
        for (std::size_t to = from; to < history.size(); to += 13) {
            DeltaRelation d = s.extract_delta("r", from, to);
            EXPECT_EQ(oracle::apply(history[from], d), history[to]) << from << ".." << to;
        }
}

TEST(Store, ExtractWithPredicate)
{
    Store s;
    load_sales(s);
    Tuple cheap = fixtures::sale(9, "Acer", "Aspire", 500, 1);
    s.commit(batch(fixtures::sales_schema(), {{DeltaTag::insert, fixtures::s8()}, {DeltaTag::insert, cheap}}));
    DeltaRelation all = s.extract_delta("sales", 0, 1);
    EXPECT_EQ(all.size(), 2);
    DeltaRelation some = s.extract_delta("sales", 0, 1, col("price") > Expr(1000));
    ASSERT_EQ(some.rows.size(), 1u);
    EXPECT_EQ(some.rows[0].tuple, fixtures::s8());
    EXPECT_TRUE(s.extract_delta("sales", 1, 1).empty());
    EXPECT_THROW(s.extract_delta("sales", 1, 0), unknown_version);
}

TEST(Store, ExportLog)
{
    Store s;
    load_sales(s);
    s.commit(batch(fixtures::sales_schema(), {{DeltaTag::insert, fixtures::s8()}}));
    std::ostringstream out;
    s.export_log_csv("sales", out);
    EXPECT_EQ(out.str(), "version:i64,tag:str,multiplicity:i64,sid:i64,brand:str,productName:str,price:i64,numSold:i64\n"
                         "1,+,1,8,HP,HP ProBook 650 G10,1299,1\n");
}

TEST(Store, ConcurrentReadersSeeCommittedVersions)
{
    Store s;
    s.create_table(Schema("r", {{"a", Kind::i64}}));
    std::atomic<bool> stop{false};
    std::atomic<int> bad{0};
    std::thread reader([&] {
        while (not stop) {
            VersionId v = s.version();
            if (s.scan_snapshot("r", v).size() != static_cast<std::int64_t>(v)) ++bad;
        }
    });
    for (int i = 0; i != 300; ++i) {
        DeltaDatabase d;
        DeltaRelation r(Schema("r", {{"a", Kind::i64}}));
        r.insert({Value(i)});
        d.relations.emplace("r", r);
        s.commit(d);
    }
    stop = true;
    reader.join();
    EXPECT_EQ(bad, 0);
}

TEST(Store, JoinDeltaWithTable)
{
    Store s;
    Database db = fixtures::rules_db();
    for (const auto &[n, r] : db.relations) {
        s.create_table(r.schema);
        s.load(r);
    }
    PartitionCatalog cat = fixtures::rules_catalog();
    AnnotatedDelta d{db.at("R").schema, {{{Value(5), Value(8)}, Sketch{0}, 1, DeltaTag::insert}}};
    AnnotatedDelta out = join_delta_with_table(s, d, "S", JoinSide::left, 0, col("b") == col("d"), cat);
    ASSERT_EQ(out.rows.size(), 1u);
    EXPECT_EQ(out.rows[0].tuple, (Tuple{Value(5), Value(8), Value(7), Value(8)}));
    EXPECT_EQ(out.rows[0].sketch, (Sketch{0, 3}));

    // n copies meeting m copies
    DeltaDatabase more;
    DeltaRelation sr(db.at("S").schema);
    sr.insert({Value(7), Value(8)}, 2);
    more.relations.emplace("S", sr);
    s.commit(more);
    AnnotatedDelta d3{db.at("R").schema, {{{Value(5), Value(8)}, Sketch{0}, 2, DeltaTag::remove}}};
    out = join_delta_with_table(s, d3, "S", JoinSide::left, 1, col("b") == col("d"), cat);
    std::int64_t removed = 0;
    for (const auto &a : out.rows) {
        EXPECT_EQ(a.tag, DeltaTag::remove);
        EXPECT_EQ(a.sketch, (Sketch{0, 3}));
        removed += a.multiplicity;
    }
    EXPECT_EQ(removed, 6);

    // delta on the right side, theta condition
    AnnotatedDelta dr{db.at("S").schema, {{{Value(1), Value(2)}, Sketch{2}, 1, DeltaTag::insert}}};
    out = join_delta_with_table(s, dr, "R", JoinSide::right, 0, col("a") > col("c"), cat);
    EXPECT_EQ(out.rows.size(), 2u);
    for (const auto &a : out.rows) EXPECT_EQ(a.tuple.size(), 4u);
}

TEST(Bloom, NoFalseNegativesAndRate)
{
    BloomFilter f(1000, 0.01);
    for (int i = 0; i != 1000; ++i) f.insert({Value(i)});
    for (int i = 0; i != 1000; ++i) EXPECT_TRUE(f.may_contain({Value(i)}));
    int fp = 0;
    const int probes = 10000;
    for (int i = 0; i != probes; ++i) fp += f.may_contain({Value(1'000'000 + i)});
    EXPECT_LE(static_cast<double>(fp) / probes, 0.02);
    EXPECT_FALSE(f.saturated());
}

TEST(Bloom, ContainsJoinKeyOfRunningExample)
{
    BloomFilter f(3, 0.01);
    Database db = fixtures::rules_db();
    for (const auto &[t, n] : db.at("S").rows) f.insert({t[1]});
    EXPECT_TRUE(f.may_contain({Value(8)}));
    AnnotatedDelta d{Schema("R", {{"a", Kind::i64}, {"b", Kind::i64}}),
                     {{{Value(5), Value(8)}, Sketch{0}, 1, DeltaTag::insert}}};
    auto kept = prefilter_join_delta(d, f, [](const Tuple &t) { return Tuple{t[1]}; });
    EXPECT_EQ(kept.rows.size(), 1u);
    BloomFilter empty(16, 0.01);
    EXPECT_TRUE(prefilter_join_delta(d, empty, [](const Tuple &t) { return Tuple{t[1]}; }).rows.empty());
}

TEST(Pushdown, SelectionsReachTheirScans)
{
    Plan q = aggregate(select(table("r"), col("b") < Expr(1000)), {"a"}, {{AggFn::sum, "c", "s"}});
    PushdownPlan p = plan_pushdown(merge(q));
    ASSERT_TRUE(p.for_relation("r"));
    EXPECT_EQ(*p.for_relation("r"), Predicate::all_of({col("b") < Expr(1000)}));

    // through a projection: conditions are rewritten to base attributes
    Plan proj = select(project(table("r"), {{col("a") * Expr(2), "x"}}), col("x") > Expr(10));
    auto pr = plan_pushdown(proj).for_relation("r");
    ASSERT_TRUE(pr);
    Schema rs("r", {{"a", Kind::i64}});
    CompiledPredicate cp(*pr, rs);
    EXPECT_TRUE(cp({Value(6)}));
    EXPECT_FALSE(cp({Value(5)}));

    // nothing crosses an aggregate
    EXPECT_TRUE(plan_pushdown(fixtures::q_top()).empty());
    // two scans of one relation: OR of both; an unfiltered scan disables pushdown
    Plan two = join(select(table("r"), col("a") < Expr(3)), project(select(table("r"), col("a") > Expr(8)), {{col("a"), "a2"}}));
    auto both = plan_pushdown(two).for_relation("r");
    ASSERT_TRUE(both);
    CompiledPredicate cb(*both, rs);
    EXPECT_TRUE(cb({Value(1)}));
    EXPECT_TRUE(cb({Value(9)}));
    EXPECT_FALSE(cb({Value(5)}));
    Plan mixed = join(select(table("r"), col("a") < Expr(3)), project(table("r"), {{col("a"), "a2"}}));
    EXPECT_FALSE(plan_pushdown(mixed).for_relation("r"));
}
