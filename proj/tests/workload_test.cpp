#include <sketchd/workload/workload.hpp>

#include <gtest/gtest.h>

#include <set>
#include <sstream>


using namespace sketchd;
using namespace sketchd::workload;

namespace {

const std::string running_example = std::string(SKETCHD_WORKLOADS) + "/running_example.jsonl";

std::size_t error_line(const std::string &text)
{
    std::istringstream in(text);
    try {
        parse_workload(in);
    } catch (const parse_error &e) {
        return e.line;
    }
    return 0;
}

Plan group_query()
{
    Plan p = aggregate(table("r"), {"a"}, {{AggFn::sum, "b", "sb"}, {AggFn::count, "", "n"}});
    return select(p, col("sb") > Expr(std::int64_t{400}));
}

Workload mixed(std::size_t ops, const std::string &ratio)
{
    MixSpec m;
    m.table.rows = 2000;
    m.table.groups = 40;
    m.fragments = 16;
    m.plan = codec::to_json(group_query());
    m.operations = ops;
    std::tie(m.updates_per_round, m.queries_per_round) = parse_ratio(ratio);
    std::ostringstream out;
    generate_mixed(m, out);
    std::istringstream in(out.str());
    return parse_workload(in);
}

RunReport run(const Workload &w, Mode mode)
{
    RunOptions o;
    o.mode = mode;
    return run_workload(w, o);
}

}

TEST(Workload, ParseErrorsCarryLineNumbers)
{
    EXPECT_EQ(error_line("# comment\n\n{\"op\":\"query\",\"name\":\"q\"}\n"), 3u);
    EXPECT_EQ(error_line("{\"op\":\"synthetic\",\"table\":\"r\",\"rows\":10,\"groups\":2}\n{oops\n"), 2u);
    EXPECT_EQ(error_line("{\"op\":\"dance\"}\n"), 1u);
    EXPECT_EQ(error_line("{\"op\":\"synthetic\",\"table\":\"r\",\"rows\":10,\"groups\":0}\n"), 1u);
    EXPECT_EQ(error_line("{\"op\":\"synthetic\",\"table\":\"r\",\"rows\":10,\"groups\":2}\n"
                         "{\"op\":\"update\",\"table\":\"r\",\"insert\":[[1,2]]}\n"), 2u);
    EXPECT_EQ(error_line("{\"op\":\"create_table\",\"schema\":{\"name\":\"t\",\"attributes\":[{\"name\":\"x\",\"kind\":\"i64\"}]}}\n"
                         "{\"op\":\"update\",\"table\":\"t\",\"generate\":{\"inserts\":1}}\n"), 2u);
    EXPECT_EQ(error_line("{\"op\":\"register\",\"name\":\"q\",\"plan\":{\"table\":\"missing\"}}\n"), 1u);
    EXPECT_EQ(error_line("{\"op\":\"synthetic\",\"table\":\"r\",\"rows\":10,\"groups\":2}\n"), 0u);
}

TEST(Workload, RunningExampleInAllModes)
{
    Workload w = parse_workload_file(running_example);
    RunReport ns = run(w, Mode::ns), fm = run(w, Mode::fm), imp = run(w, Mode::imp);
    ASSERT_EQ(ns.rows.size(), w.records.size());
    std::vector<std::size_t> queries;
    for (std::size_t i = 0; i != w.records.size(); ++i) {
        EXPECT_EQ(ns.rows[i].checksum, fm.rows[i].checksum);
        EXPECT_EQ(ns.rows[i].checksum, imp.rows[i].checksum);
        if (w.records[i].kind == Record::Kind::query) queries.push_back(i);
    }
    ASSERT_EQ(queries.size(), 2u);
    EXPECT_EQ(imp.rows[queries[0]].sketch_fragments, 2);
    EXPECT_EQ(imp.rows[queries[1]].sketch_fragments, 3);
    EXPECT_EQ(imp.rows[queries[1]].delta_rows, 1);
    EXPECT_EQ(imp.rows[queries[1]].recaptures, 0);
    EXPECT_EQ(fm.rows[queries[1]].recaptures, 1);
    EXPECT_NE(ns.rows[queries[0]].checksum, ns.rows[queries[1]].checksum);

    Runner r({Mode::imp, {}});
    for (std::size_t i = 0; i != w.records.size(); ++i) r.step(w.records[i], i);
    BagRelation expected(Schema("", {{"brand", Kind::str}, {"rev", Kind::i64}}));
    expected.add({Value("Apple"), Value(5074)});
    expected.add({Value("HP"), Value(6194)});
    EXPECT_EQ(r.last_result("top_brands").rows, expected.rows);
    EXPECT_EQ(r.manager()->entry(0)->sketch, (Sketch{1, 2, 3}));
}

TEST(Generator, GroupsAndDeterminism)
{
    SyntheticSpec spec;
    spec.rows = 2000;
    spec.groups = 50;
    spec.seed = 9;
    std::set<std::int64_t> groups;
    for (const auto &t : synthetic_rows(spec, 0, spec.rows)) groups.insert(t[1].as_int());
    EXPECT_EQ(groups.size(), 50u);
    EXPECT_EQ(*groups.begin(), 0);
    EXPECT_EQ(*groups.rbegin(), 49);

    std::ostringstream a, b, c;
    generate_synthetic(spec, a);
    generate_synthetic(spec, b);
    EXPECT_EQ(a.str(), b.str());
    spec.seed = 10;
    generate_synthetic(spec, c);
    EXPECT_NE(a.str(), c.str());

    spec.groups = 0;
    EXPECT_THROW(generate_synthetic(spec, c), error);
}

TEST(Generator, CorrelatedColumns)
{
    SyntheticSpec spec;
    spec.rows = 500;
    spec.groups = 20;
    for (const auto &t : synthetic_rows(spec, 0, spec.rows)) {
        std::int64_t a = t[1].as_int();
        for (std::int64_t k = 1; k <= 4; ++k) EXPECT_EQ(t[static_cast<std::size_t>(1 + k)].as_int(), 10 * k * a);
        for (std::size_t u = 6; u != 11; ++u) {
            EXPECT_GE(t[u].as_int(), 0);
            EXPECT_LT(t[u].as_int(), synthetic_uniform_max);
        }
    }
    spec.sigma = 5;
    std::size_t off = 0;
    for (const auto &t : synthetic_rows(spec, 0, spec.rows)) off += t[2].as_int() != 10 * t[1].as_int();
    EXPECT_GT(off, spec.rows / 2);
}

TEST(Mixed, RatiosAndAlternation)
{
    EXPECT_EQ(parse_ratio("1U1Q"), (std::pair<std::size_t, std::size_t>{1, 1}));
    EXPECT_EQ(parse_ratio("10u3q"), (std::pair<std::size_t, std::size_t>{10, 3}));
    for (const char *bad : {"", "U1Q", "1U", "1Q1U", "1UQ", "1U0Q", "xU1Q"}) EXPECT_THROW(parse_ratio(bad), error) << bad;

    Workload w = mixed(20, "1U1Q");
    ASSERT_EQ(w.records.size(), 23u);
    EXPECT_EQ(w.records[0].kind, Record::Kind::synthetic);
    EXPECT_EQ(w.records[1].kind, Record::Kind::partition);
    EXPECT_EQ(w.records[2].kind, Record::Kind::register_query);
    for (std::size_t i = 3; i != w.records.size(); ++i)
        EXPECT_EQ(w.records[i].kind, (i - 3) % 2 ? Record::Kind::query : Record::Kind::update) << i;

    Workload w3 = mixed(8, "3U1Q");
    std::string kinds;
    for (std::size_t i = 3; i != w3.records.size(); ++i) kinds += w3.records[i].kind == Record::Kind::query ? 'Q' : 'U';
    EXPECT_EQ(kinds, "UUUQUUUQ");
}

TEST(Mixed, ModesAgree)
{
    Workload w = mixed(40, "1U1Q");
    RunReport ns = run(w, Mode::ns), fm = run(w, Mode::fm), imp = run(w, Mode::imp);
    Comparison c = compare_reports(ns, imp);
    EXPECT_NO_THROW(compare_reports(ns, fm));
    EXPECT_EQ(c.baseline, Mode::ns);
    EXPECT_EQ(c.other, Mode::imp);
    ASSERT_EQ(c.rows.size(), 1u);
    EXPECT_EQ(c.rows[0].delta_rows, 10);
    std::int64_t imp_recaptures = 0;
    for (const auto &r : imp.rows) imp_recaptures += r.recaptures;
    EXPECT_EQ(imp_recaptures, 0);
}

TEST(Report, RoundTripAndCompare)
{
    RunReport r;
    for (std::size_t i = 0; i != 6; ++i) {
        ReportRow x;
        x.index = i;
        x.kind = i % 2 ? "query" : "update";
        x.mode = Mode::imp;
        x.wall_us = 100 + static_cast<std::int64_t>(i);
        x.delta_rows = i % 2 ? 5 : 5;
        x.sketch_fragments = i % 2 ? 3 : 0;
        x.checksum = i % 2 ? "00000000000000ab" : "";
        r.rows.push_back(x);
    }
    std::stringstream ss;
    write_report(ss, r);
    RunReport back = read_report(ss);
    ASSERT_EQ(back.rows.size(), r.rows.size());
    for (std::size_t i = 0; i != r.rows.size(); ++i) {
        EXPECT_TRUE(back.rows[i].same_outcome(r.rows[i]));
        EXPECT_EQ(back.rows[i].wall_us, r.rows[i].wall_us);
        EXPECT_EQ(back.rows[i].sketch_fragments, r.rows[i].sketch_fragments);
    }

    Comparison same = compare_reports(r, r);
    ASSERT_EQ(same.rows.size(), 1u);
    EXPECT_DOUBLE_EQ(same.rows[0].ratio, 1.0);
    EXPECT_EQ(same.crossover, std::optional<double>(5.0));

    RunReport other = r;
    other.rows[3].checksum = "00000000000000ac";
    EXPECT_THROW(compare_reports(r, other), mismatched_workloads);
    other = r;
    other.rows.pop_back();
    EXPECT_THROW(compare_reports(r, other), mismatched_workloads);

    std::stringstream bad("index,kind\n");
    EXPECT_THROW(read_report(bad), parse_error);
    std::stringstream bad_row(std::string(report_header) + "\n1,query,imp,x,0,0,0,\n");
    try {
        read_report(bad_row);
        FAIL();
    } catch (const parse_error &e) {
        EXPECT_EQ(e.line, 2u);
    }
}

TEST(Report, Crossover)
{
    std::vector<RatioRow> rows{{10, 100, 10, 0.1}, {100, 100, 50, 0.5}, {1000, 100, 150, 1.5}};
    auto x = crossover(rows);
    ASSERT_TRUE(x);
    EXPECT_DOUBLE_EQ(*x, 550.0);
    rows.pop_back();
    EXPECT_FALSE(crossover(rows));
}
