#pragma once

#include <sketchd/codec.hpp>
#include <sketchd/eval.hpp>
#include <sketchd/manager.hpp>
#include <sketchd/store.hpp>
#include <sketchd/workload/generator.hpp>
#include <sketchd/workload/report.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>


namespace sketchd::workload {

using codec::json;

/** One line of a workload file.  Records are JSON objects with an "op" field:
 *
 *   {"op":"create_table","schema":{"name":..,"attributes":[{"name":..,"kind":..}]}}
 *   {"op":"load","table":..,"csv":<path relative to the workload>}      creates the table from the CSV header if needed
 *   {"op":"load","table":..,"rows":[[..],..]}
 *   {"op":"synthetic","table":..,"rows":..,"groups":..,"seed":..,"sigma":..}
 *   {"op":"partition","relation":..,"attribute":..,"boundaries":[..]}   or "equi_depth": <fragments>
 *   {"op":"register","name":..,"plan":<plan>}
 *   {"op":"update","table":..,"insert":[[..]],"delete":[[..]]}
 *   {"op":"update","table":..,"generate":{"inserts":..,"deletes":..,"seed":..}}   synthetic tables only
 *   {"op":"query","name":..}
 *   {"op":"checkpoint","label":..}
 *
 * Blank lines and lines starting with '#' are ignored. */
struct Record
{
    enum class Kind : std::uint8_t { create_table, load, synthetic, partition, register_query, update, query, checkpoint };

    Kind kind = Kind::checkpoint;
    std::size_t line = 0;
    std::string name;               ///< table, query or checkpoint label
    Schema schema;                  ///< create_table
    std::string csv_path;           ///< load from CSV
    std::vector<Tuple> rows;        ///< load from inline rows
    SyntheticSpec synthetic;
    json partition;
    Plan plan;
    DeltaRelation delta;            ///< update with explicit rows
    bool generated = false;
    std::int64_t gen_inserts = 0, gen_deletes = 0;
    std::uint64_t gen_seed = 0;
};

inline std::string_view record_kind_name(Record::Kind k)
{
    switch (k) {
        case Record::Kind::create_table: return "create_table";
        case Record::Kind::load: return "load";
        case Record::Kind::synthetic: return "synthetic";
        case Record::Kind::partition: return "partition";
        case Record::Kind::register_query: return "register";
        case Record::Kind::update: return "update";
        case Record::Kind::query: return "query";
        case Record::Kind::checkpoint: return "checkpoint";
    }
    return "?";
}

struct Workload
{
    std::vector<Record> records;
};

namespace detail {

inline std::vector<Tuple> rows_from_json(const json &j, const Schema &schema)
{
    std::vector<Tuple> out;
    for (const auto &r : j) out.push_back(codec::coerce(codec::tuple_from_json(r), schema));
    return out;
}

inline Schema csv_schema(const std::string &path, const std::string &relation)
{
    std::ifstream in(path);
    if (not in) throw error("cannot open '" + path + "'");
    std::string header;
    if (not std::getline(in, header)) throw error("'" + path + "' is empty");
    return Schema(relation, csv::parse_header(header, 1));
}

}

/** Parses and validates a workload.  Relative CSV paths are resolved against `base_dir`. */
inline Workload parse_workload(std::istream &in, const std::filesystem::path &base_dir = {})
{
    Workload w;
    std::map<std::string, Schema, std::less<>> tables;
    std::set<std::string, std::less<>> synthetic_tables, queries;
    std::string text;
    std::size_t lineno = 0;
    while (std::getline(in, text)) {
        ++lineno;
        auto first = text.find_first_not_of(" \t\r");
        if (first == std::string::npos or text[first] == '#') continue;
        Record r;
        r.line = lineno;
        try {
            json j = json::parse(text);
            auto op = j.at("op").get<std::string>();
            auto table_schema = [&](const std::string &t) -> const Schema & {
                auto it = tables.find(t);
                if (it == tables.end()) throw error("unknown table '" + t + "'");
                return it->second;
            };
            if (op == "create_table") {
                r.kind = Record::Kind::create_table;
                r.schema = codec::schema_from_json(j.at("schema"));
                r.name = r.schema.name;
                if (tables.contains(r.name)) throw error("table '" + r.name + "' already exists");
                tables.emplace(r.name, r.schema);
            } else if (op == "load") {
                r.kind = Record::Kind::load;
                r.name = j.at("table").get<std::string>();
                if (j.contains("csv")) {
                    std::filesystem::path p = j.at("csv").get<std::string>();
                    r.csv_path = (p.is_relative() ? base_dir / p : p).string();
                    Schema s = detail::csv_schema(r.csv_path, r.name);
                    if (auto it = tables.find(r.name); it != tables.end()) {
                        if (not it->second.compatible(s)) throw error("CSV header does not match table '" + r.name + "'");
                    } else {
                        tables.emplace(r.name, s);
                    }
                } else {
                    r.rows = detail::rows_from_json(j.at("rows"), table_schema(r.name));
                }
            } else if (op == "synthetic") {
                r.kind = Record::Kind::synthetic;
                r.name = j.at("table").get<std::string>();
                r.synthetic.relation = r.name;
                r.synthetic.rows = j.at("rows").get<std::int64_t>();
                r.synthetic.groups = j.at("groups").get<std::int64_t>();
                r.synthetic.seed = j.value("seed", std::uint64_t{1});
                r.synthetic.sigma = j.value("sigma", 0.0);
                check_spec(r.synthetic);
                if (tables.contains(r.name)) throw error("table '" + r.name + "' already exists");
                tables.emplace(r.name, synthetic_schema(r.name));
                synthetic_tables.insert(r.name);
            } else if (op == "partition") {
                r.kind = Record::Kind::partition;
                r.name = j.at("relation").get<std::string>();
                const Schema &s = table_schema(r.name);
                auto attr = j.at("attribute").get<std::string>();
                Kind k = s.attributes[s.index_of(attr)].kind;
                if (j.contains("boundaries")) codec::partition_from_json(j, k);
                else if (j.at("equi_depth").get<std::int64_t>() < 1) throw error("equi_depth needs at least one fragment");
                r.partition = j;
            } else if (op == "register") {
                r.kind = Record::Kind::register_query;
                r.name = j.at("name").get<std::string>();
                r.plan = without_merge(codec::plan_from_json(j.at("plan")));
                for (const auto &rel : base_relations(r.plan)) table_schema(rel);
                if (not queries.insert(r.name).second) throw error("query '" + r.name + "' is already registered");
            } else if (op == "update") {
                r.kind = Record::Kind::update;
                r.name = j.at("table").get<std::string>();
                const Schema &s = table_schema(r.name);
                if (j.contains("generate")) {
                    if (not synthetic_tables.contains(r.name))
                        throw error("generated updates need a synthetic table, '" + r.name + "' is not one");
                    const auto &g = j.at("generate");
                    r.generated = true;
                    r.gen_inserts = g.value("inserts", std::int64_t{0});
                    r.gen_deletes = g.value("deletes", std::int64_t{0});
                    r.gen_seed = g.value("seed", std::uint64_t{0});
                    if (r.gen_inserts < 0 or r.gen_deletes < 0) throw error("generated update sizes must be >= 0");
                } else {
                    r.delta = DeltaRelation(s);
                    if (j.contains("delete"))
                        for (auto &t : detail::rows_from_json(j.at("delete"), s)) r.delta.remove(std::move(t));
                    if (j.contains("insert"))
                        for (auto &t : detail::rows_from_json(j.at("insert"), s)) r.delta.insert(std::move(t));
                }
            } else if (op == "query") {
                r.kind = Record::Kind::query;
                r.name = j.at("name").get<std::string>();
                if (not queries.contains(r.name)) throw error("query '" + r.name + "' is not registered");
            } else if (op == "checkpoint") {
                r.kind = Record::Kind::checkpoint;
                r.name = j.value("label", std::string());
            } else {
                throw error("unknown record kind '" + op + "'");
            }
        } catch (const parse_error &e) {
            throw parse_error(lineno, e.what());
        } catch (const json::exception &e) {
            throw parse_error(lineno, e.what());
        } catch (const error &e) {
            throw parse_error(lineno, e.what());
        }
        w.records.push_back(std::move(r));
    }
    return w;
}

inline Workload parse_workload_file(const std::string &path)
{
    std::ifstream in(path);
    if (not in) throw error("cannot open '" + path + "'");
    return parse_workload(in, std::filesystem::path(path).parent_path());
}

struct RunOptions
{
    Mode mode = Mode::imp;
    ManagerConfig manager;
};

/** Replays a workload against a fresh store.  Queries are answered by plain evaluation (ns), through sketches that
 * are recaptured whenever stale (fm) or through incrementally maintained sketches (imp). */
class Runner
{
    struct SyntheticTable
    {
        SyntheticSpec spec;
        std::vector<std::int64_t> live;
        std::int64_t next_id = 0;
    };

    RunOptions options_;
    Store store_;
    std::unique_ptr<SketchManager> manager_;
    std::map<std::string, Plan, std::less<>> queries_;
    std::map<std::string, std::int64_t, std::less<>> pending_;   ///< update rows since each query last ran
    std::map<std::string, SyntheticTable, std::less<>> synthetic_;
    std::map<std::string, BagRelation> last_results_;

    DeltaRelation generate(const Record &r) {
        auto &s = synthetic_.at(r.name);
        DeltaRelation d(synthetic_schema(r.name));
        std::mt19937_64 rng(r.gen_seed);
        for (std::int64_t i = 0; i != r.gen_deletes and not s.live.empty(); ++i) {
            std::size_t k = static_cast<std::size_t>(rng() % s.live.size());
            d.remove(synthetic_row(s.spec, s.live[k]));
            s.live[k] = s.live.back();
            s.live.pop_back();
        }
        for (std::int64_t i = 0; i != r.gen_inserts; ++i) {
            d.insert(synthetic_row(s.spec, s.next_id));
            s.live.push_back(s.next_id++);
        }
        return d;
    }

    std::int64_t total_recaptures() const {
        if (not manager_) return 0;
        std::int64_t n = 0;
        for (const auto &e : manager_->entries()) n += static_cast<std::int64_t>(e->recaptures);
        return n;
    }

    RangePartition make_partition(const json &j) {
        auto rel = j.at("relation").get<std::string>();
        auto attr = j.at("attribute").get<std::string>();
        const Schema &s = store_.schema(rel);
        std::size_t idx = s.index_of(attr);
        Kind k = s.attributes[idx].kind;
        if (j.contains("boundaries")) return codec::partition_from_json(j, k);
        std::vector<Value> values;
        store_.scan(rel, [&](const Tuple &t, std::int64_t n) {
            for (std::int64_t i = 0; i != n; ++i) values.push_back(t[idx]);
        });
        return equi_depth(rel, attr, k, std::move(values), j.at("equi_depth").get<std::size_t>());
    }

    public:
    explicit Runner(RunOptions options) : options_(std::move(options)) {
        if (options_.mode != Mode::ns) {
            ManagerConfig c = options_.manager;
            c.full_maintenance = options_.mode == Mode::fm;
            manager_ = std::make_unique<SketchManager>(store_, c);
        }
    }

    Store & store() { return store_; }
    SketchManager * manager() { return manager_.get(); }

    /** Result of the most recent run of a named query. */
    const BagRelation & last_result(const std::string &query) const { return last_results_.at(query); }

    ReportRow step(const Record &r, std::size_t index) {
        ReportRow row;
        row.index = index;
        row.kind = std::string(record_kind_name(r.kind));
        row.mode = options_.mode;
        std::int64_t recaptures_before = total_recaptures();
        auto start = std::chrono::steady_clock::now();
        {
            switch (r.kind) {
                case Record::Kind::create_table: store_.create_table(r.schema); break;
                case Record::Kind::load:
                    if (not r.csv_path.empty()) {
                        std::ifstream in(r.csv_path);
                        if (not in) throw error("cannot open '" + r.csv_path + "'");
                        store_.load_csv(in, r.name);
                    } else {
                        store_.load_rows(r.name, r.rows);
                    }
                    break;
                case Record::Kind::synthetic: {
                    store_.create_table(synthetic_schema(r.name));
                    SyntheticTable t{r.synthetic, {}, 0};
                    constexpr std::int64_t chunk = 65536;
                    for (std::int64_t from = 0; from < r.synthetic.rows; from += chunk)
                        store_.load_rows(r.name, synthetic_rows(r.synthetic, from, std::min(chunk, r.synthetic.rows - from)));
                    t.live.resize(static_cast<std::size_t>(r.synthetic.rows));
                    for (std::int64_t i = 0; i != r.synthetic.rows; ++i) t.live[static_cast<std::size_t>(i)] = i;
                    t.next_id = r.synthetic.rows;
                    synthetic_.insert_or_assign(r.name, std::move(t));
                    break;
                }
                case Record::Kind::partition:
                    if (manager_) manager_->declare_partition(make_partition(r.partition));
                    break;
                case Record::Kind::register_query:
                    queries_.insert_or_assign(r.name, r.plan);
                    pending_[r.name] = 0;
                    break;
                case Record::Kind::update: {
                    DeltaDatabase batch;
                    DeltaRelation d = r.generated ? generate(r) : r.delta;
                    row.delta_rows = d.size();
                    for (auto &[q, n] : pending_) {
                        auto rels = base_relations(queries_.at(q));
                        if (std::find(rels.begin(), rels.end(), r.name) != rels.end()) n += row.delta_rows;
                    }
                    batch.relations.emplace(r.name, std::move(d));
                    if (manager_) manager_->on_update(batch);
                    else store_.commit(batch);
                    break;
                }
                case Record::Kind::query: {
                    const Plan &plan = queries_.at(r.name);
                    row.delta_rows = std::exchange(pending_.at(r.name), 0);
                    BagRelation result;
                    if (manager_) {
                        Answer a = manager_->answer(plan);
                        row.sketch_fragments = static_cast<std::int64_t>(a.sketch.count());
                        result = std::move(a.result);
                    } else {
                        result = eval(plan, StoreSnapshot(store_, store_.version()));
                    }
                    row.checksum = hex64(checksum(result));
                    last_results_.insert_or_assign(r.name, std::move(result));
                    break;
                }
                case Record::Kind::checkpoint: break;
            }
        }
        auto end = std::chrono::steady_clock::now();
        row.wall_us = std::chrono::duration_cast<std::chrono::microseconds>(end - start).count();
        row.recaptures = total_recaptures() - recaptures_before;
        return row;
    }

    RunReport run(const Workload &w) {
        RunReport report;
        for (std::size_t i = 0; i != w.records.size(); ++i) report.rows.push_back(step(w.records[i], i));
        return report;
    }
};

inline RunReport run_workload(const Workload &w, const RunOptions &options)
{
    return Runner(options).run(w);
}

/** Replays `w` `repeat + 1` times, drops the first (warm-up) run and reports the median time per operation.
 * Non-timing columns must agree between repetitions. */
inline RunReport run_workload_repeated(const Workload &w, const RunOptions &options, std::size_t repeat)
{
    run_workload(w, options);
    std::vector<RunReport> runs;
    for (std::size_t i = 0; i != std::max<std::size_t>(repeat, 1); ++i) runs.push_back(run_workload(w, options));
    RunReport out = runs.back();
    for (std::size_t op = 0; op != out.rows.size(); ++op) {
        std::vector<double> times;
        for (const auto &r : runs) {
            if (not r.rows[op].same_outcome(out.rows[op])) throw error("repetitions of the workload disagree");
            times.push_back(static_cast<double>(r.rows[op].wall_us));
        }
        out.rows[op].wall_us = static_cast<std::int64_t>(median(times));
    }
    return out;
}

/** Parameters of a generated mixed workload over one synthetic table. */
struct MixSpec
{
    SyntheticSpec table;
    std::string partition_attribute = "a";
    std::size_t fragments = 128;
    json plan;                      ///< query over `table.relation`
    std::size_t operations = 1000;
    std::size_t updates_per_round = 1;   ///< "xUyQ": x updates then y queries per round
    std::size_t queries_per_round = 1;
    std::int64_t delta_rows = 10;        ///< rows per update
    double delete_fraction = 0.5;
    std::uint64_t seed = 7;
};

/** Parses a ratio such as "1U1Q" or "10U1Q" into (updates, queries) per round. */
inline std::pair<std::size_t, std::size_t> parse_ratio(std::string_view s)
{
    auto u = s.find_first_of("uU");
    auto q = s.find_first_of("qQ");
    if (u == std::string_view::npos or q == std::string_view::npos or q != s.size() - 1 or u == 0 or q == u + 1)
        throw error("ratio must look like 1U1Q");
    try {
        std::size_t a = std::stoul(std::string(s.substr(0, u)));
        std::size_t b = std::stoul(std::string(s.substr(u + 1, q - u - 1)));
        if (b == 0) throw error("ratio needs at least one query per round");
        return {a, b};
    } catch (const std::logic_error&) {
        throw error("ratio must look like 1U1Q");
    }
}

/** Writes a workload of `operations` update/query records alternating in the given ratio, preceded by the synthetic
 * table, its partition and the registered query "q". */
inline void generate_mixed(const MixSpec &m, std::ostream &out)
{
    check_spec(m.table);
    if (m.delete_fraction < 0 or m.delete_fraction > 1) throw error("delete fraction must lie in [0, 1]");
    out << json{{"op", "synthetic"}, {"table", m.table.relation}, {"rows", m.table.rows}, {"groups", m.table.groups},
                {"seed", m.table.seed}, {"sigma", m.table.sigma}}.dump() << '\n';
    out << json{{"op", "partition"}, {"relation", m.table.relation}, {"attribute", m.partition_attribute},
                {"equi_depth", m.fragments}}.dump() << '\n';
    out << json{{"op", "register"}, {"name", "q"}, {"plan", m.plan}}.dump() << '\n';
    auto deletes = static_cast<std::int64_t>(std::llround(static_cast<double>(m.delta_rows) * m.delete_fraction));
    std::mt19937_64 rng(m.seed);
    std::size_t done = 0;
    while (done < m.operations) {
        for (std::size_t i = 0; i != m.updates_per_round and done < m.operations; ++i, ++done)
            out << json{{"op", "update"}, {"table", m.table.relation},
                        {"generate", {{"inserts", m.delta_rows - deletes}, {"deletes", deletes}, {"seed", rng()}}}}.dump()
                << '\n';
        for (std::size_t i = 0; i != m.queries_per_round and done < m.operations; ++i, ++done)
            out << json{{"op", "query"}, {"name", "q"}}.dump() << '\n';
    }
}

}
