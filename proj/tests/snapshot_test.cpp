#include "support/fixtures.hpp"
#include "support/properties.hpp"

#include <sketchd/engine/snapshot.hpp>

#include <gtest/gtest.h>

#include <filesystem>


using namespace sketchd;

namespace {

corpus::Case make(std::uint64_t i)
{
    corpus::Generator g(0);
    return g.next(0x5a9e0000 + i);
}

EngineState rules_state(EngineConfig config = {})
{
    return init_state(merge(fixtures::rules_query()), DatabaseSource(fixtures::rules_db()), fixtures::rules_catalog(),
                      config).first;
}

}

TEST(Snapshot, CorpusRoundTrips)
{
    for (std::uint64_t i = 0; i != 80; ++i) {
        auto c = make(i);
        auto exact = props::check_persistence(c, EngineConfig::exact());
        ASSERT_TRUE(exact.empty()) << exact;
        auto optimized = props::check_persistence(c, EngineConfig{});
        ASSERT_TRUE(optimized.empty()) << optimized;
        EngineConfig tight;
        tight.topk_buffer = 1;
        tight.minmax_buffer = 1;
        try {
            auto t = props::check_persistence(c, tight);
            ASSERT_TRUE(t.empty()) << t;
        } catch (const invalid_plan&) {
            // buffer smaller than k
        }
    }
}

TEST(Snapshot, BloomFiltersSurvive)
{
    EngineState st = rules_state();
    EngineState back = restore_state(persist_state(st));
    EXPECT_TRUE(back.same_state(st));
    EXPECT_EQ(back.config, st.config);
    DeltaDatabase d;
    DeltaRelation r(fixtures::rules_db().at("R").schema);
    r.insert({Value(5), Value(8)});
    r.insert({Value(4), Value(99)});
    d.relations.emplace("R", r);
    SketchDelta a = process_delta(st, annotate_delta(d, st.catalog), DatabaseSource(fixtures::rules_db()));
    SketchDelta b = process_delta(back, annotate_delta(d, back.catalog), DatabaseSource(fixtures::rules_db()));
    EXPECT_EQ(a.inserts, b.inserts);
    EXPECT_EQ(a.deletes, b.deletes);
    EXPECT_EQ(a.inserts, (Sketch{0, 3}));
    EXPECT_EQ(st.stats.join_delta_in, back.stats.join_delta_in);
    EXPECT_EQ(st.stats.join_delta_forwarded, back.stats.join_delta_forwarded);
    EXPECT_EQ(persist_state(st), persist_state(back));
}

TEST(Snapshot, Files)
{
    auto path = std::filesystem::temp_directory_path() / "sketchd-snapshot-test.json";
    EngineState st = rules_state(EngineConfig::exact());
    persist_state_file(st, path.string());
    EXPECT_EQ(persist_state(restore_state_file(path.string())), persist_state(st));
    std::filesystem::remove(path);
    EXPECT_THROW(restore_state_file(path.string()), corrupt_snapshot);
}

TEST(Snapshot, CorruptInputs)
{
    std::string text = persist_state(rules_state());
    for (std::size_t cut : {std::size_t{0}, std::size_t{1}, text.size() / 3, text.size() / 2, text.size() - 3})
        EXPECT_THROW(restore_state(text.substr(0, cut)), corrupt_snapshot) << cut;
    auto mutate = [&](auto f) {
        auto j = codec::json::parse(text);
        f(j);
        return j.dump();
    };
    EXPECT_THROW(restore_state(mutate([](auto &j) { j["format"] = "other"; })), corrupt_snapshot);
    EXPECT_THROW(restore_state(mutate([](auto &j) { j["format_version"] = 2; })), corrupt_snapshot);
    EXPECT_THROW(restore_state(mutate([](auto &j) { j.erase("nodes"); })), corrupt_snapshot);
    EXPECT_THROW(restore_state(mutate([](auto &j) { j["nodes"].erase(j["nodes"].size() - 1); })), corrupt_snapshot);
    EXPECT_THROW(restore_state(mutate([](auto &j) { j["nodes"].push_back(j["nodes"][0]); })), corrupt_snapshot);
    EXPECT_THROW(restore_state(mutate([](auto &j) { j["plan"] = {{"table", "nope"}}; })), corrupt_snapshot);
    EXPECT_THROW(restore_state(mutate([](auto &j) { j["schemas"] = codec::json::array(); })), corrupt_snapshot);
    EXPECT_THROW(restore_state(mutate([](auto &j) { j["catalog"] = codec::json::array(); })), corrupt_snapshot);
    EXPECT_THROW(restore_state(mutate([](auto &j) { j["config"]["bloom"] = "yes"; })), corrupt_snapshot);
    EXPECT_THROW(restore_state("[1,2,3]"), corrupt_snapshot);
}
