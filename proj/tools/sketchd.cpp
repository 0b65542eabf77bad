#include <sketchd/sketchd.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>


using namespace sketchd;
using namespace sketchd::workload;

namespace {

/** Writes to `path`, or to stdout when it is empty or "-". */
template<typename Fn>
void with_output(const std::string &path, Fn &&fn)
{
    if (path.empty() or path == "-") {
        fn(std::cout);
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (not out) throw error("cannot write '" + path + "'");
    fn(out);
    if (not out) throw error("failed writing '" + path + "'");
}

std::string read_text(const std::string &arg)
{
    if (arg.empty() or arg[0] != '@') return arg;
    std::ifstream in(arg.substr(1));
    if (not in) throw error("cannot open '" + arg.substr(1) + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// default query of generated workloads: groups of a whose average c exceeds a threshold
constexpr const char *default_mixed_plan = R"({"select":{"cmp":">","lhs":"avg_c","rhs":{"const":25000.0}},
 "input":{"aggregate":{"group_by":["a"],"aggs":[{"fn":"avg","arg":"c","as":"avg_c"}]},"input":{"table":"r"}}})";

}

int main(int argc, char **argv)
{
    CLI::App app{"Provenance sketch maintenance: workload replay and data generation"};
    app.require_subcommand(1);

    // run
    auto *run = app.add_subcommand("run", "replay a workload file and write a CSV report");
    std::string workload_path, mode = "imp", strategy = "lazy", reuse = "exact", state_dir, report_path;
    std::size_t batch_size = 50, max_resident = 0, repeat = 0, topk_buffer = 0, minmax_buffer = 16;
    bool exact = false;
    std::string bloom = "on", pushdown = "on";
    double bloom_fpr = 0.01;
    run->add_option("--workload", workload_path, "workload file (JSON lines)")->required()->check(CLI::ExistingFile);
    run->add_option("--mode", mode, "ns, fm or imp")->check(CLI::IsMember({"ns", "fm", "imp"}));
    run->add_option("--strategy", strategy, "eager or lazy maintenance")->check(CLI::IsMember({"eager", "lazy"}));
    run->add_option("--batch-size", batch_size, "eager batch size in delta rows")->check(CLI::PositiveNumber);
    run->add_option("--reuse", reuse, "exact or relaxed sketch reuse")->check(CLI::IsMember({"exact", "relaxed"}));
    run->add_option("--state-dir", state_dir, "directory for evicted engine states");
    run->add_option("--max-resident", max_resident, "engine states kept in memory (0 = all)");
    run->add_option("--repeat", repeat, "timed repetitions after one warm-up run (0 = single run)");
    run->add_option("--topk-buffer", topk_buffer, "top-k buffer size l (0 = 5k)");
    run->add_option("--minmax-buffer", minmax_buffer, "min/max buffer size")->check(CLI::PositiveNumber);
    run->add_option("--bloom-fpr", bloom_fpr, "bloom filter false positive rate")->check(CLI::Range(1e-9, 0.5));
    run->add_flag("--exact", exact, "unbounded state, bloom filters and pushdown off");
    run->add_option("--bloom", bloom, "bloom prefiltering of join deltas")->check(CLI::IsMember({"on", "off"}));
    run->add_option("--pushdown", pushdown, "selection pushdown into delta extraction")->check(CLI::IsMember({"on", "off"}));
    run->add_option("--out", report_path, "report path (default stdout)");

    // gen
    auto *gen = app.add_subcommand("gen", "generate a synthetic table as CSV");
    SyntheticSpec spec;
    std::string gen_out;
    gen->add_option("--rows", spec.rows, "number of rows")->required()->check(CLI::PositiveNumber);
    gen->add_option("--groups", spec.groups, "distinct values of a")->required()->check(CLI::PositiveNumber);
    gen->add_option("--seed", spec.seed, "random seed");
    gen->add_option("--sigma", spec.sigma, "noise of the correlated columns")->check(CLI::NonNegativeNumber);
    gen->add_option("--relation", spec.relation, "relation name");
    gen->add_option("--out", gen_out, "output path (default stdout)");

    // mix
    auto *mix = app.add_subcommand("mix", "generate a mixed update/query workload over a synthetic table");
    MixSpec m;
    std::string ratio = "1U1Q", plan_text = default_mixed_plan, mix_out;
    mix->add_option("--rows", m.table.rows, "rows of the synthetic table")->check(CLI::PositiveNumber);
    mix->add_option("--groups", m.table.groups, "distinct values of a")->check(CLI::PositiveNumber);
    mix->add_option("--seed", m.table.seed, "table seed");
    mix->add_option("--sigma", m.table.sigma, "noise of the correlated columns")->check(CLI::NonNegativeNumber);
    mix->add_option("--ratio", ratio, "updates and queries per round, e.g. 1U1Q or 10U1Q");
    mix->add_option("--operations", m.operations, "update and query records");
    mix->add_option("--delta", m.delta_rows, "rows per update")->check(CLI::PositiveNumber);
    mix->add_option("--delete-fraction", m.delete_fraction, "share of deletions per update")->check(CLI::Range(0.0, 1.0));
    mix->add_option("--fragments", m.fragments, "equi-depth fragments on the partition attribute")->check(CLI::PositiveNumber);
    mix->add_option("--attribute", m.partition_attribute, "partition attribute");
    mix->add_option("--plan", plan_text, "query plan as JSON, or @file");
    mix->add_option("--update-seed", m.seed, "seed of the generated updates");
    mix->add_option("--out", mix_out, "output path (default stdout)");

    // compare
    auto *cmp = app.add_subcommand("compare", "compare run reports of the same workload");
    std::vector<std::string> reports;
    std::string cmp_out;
    cmp->add_option("reports", reports, "baseline report followed by the reports to compare")
        ->required()->expected(2, -1)->check(CLI::ExistingFile);
    cmp->add_option("--out", cmp_out, "output path (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            RunOptions o;
            o.mode = parse_mode(mode);
            o.manager.strategy = strategy == "eager" ? Strategy::eager(batch_size) : Strategy::lazy();
            o.manager.reuse = reuse == "relaxed" ? Reuse::relaxed : Reuse::exact;
            o.manager.state_dir = state_dir;
            o.manager.max_resident = max_resident;
            EngineConfig &e = o.manager.engine;
            if (exact) e = EngineConfig::exact();
            e.bloom = e.bloom and bloom == "on";
            e.pushdown = e.pushdown and pushdown == "on";
            e.bloom_fpr = bloom_fpr;
            e.topk_buffer = topk_buffer;
            e.minmax_buffer = minmax_buffer;
            if (max_resident and state_dir.empty()) throw error("--max-resident needs --state-dir");
            Workload w = parse_workload_file(workload_path);
            RunReport r = repeat ? run_workload_repeated(w, o, repeat) : run_workload(w, o);
            with_output(report_path, [&](std::ostream &out) { write_report(out, r); });
        } else if (*gen) {
            with_output(gen_out, [&](std::ostream &out) { generate_synthetic(spec, out); });
        } else if (*mix) {
            std::tie(m.updates_per_round, m.queries_per_round) = parse_ratio(ratio);
            m.plan = codec::json::parse(read_text(plan_text));
            codec::plan_from_json(m.plan);
            with_output(mix_out, [&](std::ostream &out) { generate_mixed(m, out); });
        } else if (*cmp) {
            RunReport base = read_report(reports[0]);
            with_output(cmp_out, [&](std::ostream &out) {
                for (std::size_t i = 1; i != reports.size(); ++i) write_comparison(out, compare_reports(base, read_report(reports[i])));
            });
        }
    } catch (const std::exception &e) {
        std::cerr << "sketchd: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
