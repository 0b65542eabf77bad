#pragma once

#include <sketchd/csv.hpp>
#include <sketchd/error.hpp>
#include <sketchd/relation.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>


namespace sketchd::workload {

enum class Mode : std::uint8_t { ns, fm, imp };

inline std::string_view mode_name(Mode m)
{
    switch (m) {
        case Mode::ns: return "ns";
        case Mode::fm: return "fm";
        case Mode::imp: return "imp";
    }
    return "?";
}

inline Mode parse_mode(std::string_view s)
{
    if (s == "ns") return Mode::ns;
    if (s == "fm") return Mode::fm;
    if (s == "imp") return Mode::imp;
    throw error("unknown mode '" + std::string(s) + "' (expected ns, fm or imp)");
}

/** Order-independent digest of a bag. */
inline std::uint64_t checksum(const BagRelation &r)
{
    std::uint64_t h = sketchd::detail::mix64(r.schema.arity());
    for (const auto &[t, n] : r.rows)
        h += sketchd::detail::mix64(hash_tuple(t, 0x1f3d5b79) ^ (static_cast<std::uint64_t>(n) * 0x9e3779b97f4a7c15ULL));
    return h;
}

inline std::string hex64(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

struct ReportRow
{
    std::size_t index = 0;
    std::string kind;
    Mode mode = Mode::ns;
    std::int64_t wall_us = 0;
    std::int64_t delta_rows = 0;
    std::int64_t sketch_fragments = 0;
    std::int64_t recaptures = 0;
    std::string checksum;   ///< hex digest of the query result; empty for other operations

    /** Everything except the timing. */
    bool same_outcome(const ReportRow &o) const {
        return index == o.index and kind == o.kind and delta_rows == o.delta_rows and checksum == o.checksum;
    }
};

struct RunReport
{
    std::vector<ReportRow> rows;
};

inline constexpr const char *report_header = "index,kind,mode,wall_us,delta_rows,sketch_fragments,recaptures,checksum";

inline void write_report(std::ostream &out, const RunReport &r)
{
    out << report_header << '\n';
    for (const auto &x : r.rows)
        out << x.index << ',' << x.kind << ',' << mode_name(x.mode) << ',' << x.wall_us << ',' << x.delta_rows << ','
            << x.sketch_fragments << ',' << x.recaptures << ',' << x.checksum << '\n';
}

inline RunReport read_report(std::istream &in)
{
    std::string line;
    std::size_t lineno = 1;
    if (not std::getline(in, line) or line != report_header) throw parse_error(1, "not a run report");
    RunReport r;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto f = csv::split(line, lineno);
        if (f.size() != 8) throw parse_error(lineno, "expected 8 fields");
        ReportRow x;
        try {
            x.index = static_cast<std::size_t>(std::stoull(f[0]));
            x.kind = f[1];
            x.mode = parse_mode(f[2]);
            x.wall_us = std::stoll(f[3]);
            x.delta_rows = std::stoll(f[4]);
            x.sketch_fragments = std::stoll(f[5]);
            x.recaptures = std::stoll(f[6]);
        } catch (const std::logic_error &e) {
            throw parse_error(lineno, std::string("malformed number: ") + e.what());
        } catch (const error &e) {
            throw parse_error(lineno, e.what());
        }
        x.checksum = f[7];
        r.rows.push_back(std::move(x));
    }
    return r;
}

inline RunReport read_report(const std::string &path)
{
    std::ifstream in(path);
    if (not in) throw error("cannot open '" + path + "'");
    return read_report(in);
}

/** Per delta size: median query time of the baseline and of the other report, and their ratio other/baseline. */
struct RatioRow
{
    std::int64_t delta_rows = 0;
    double baseline_us = 0;
    double other_us = 0;
    double ratio = 1;
};

struct Comparison
{
    Mode baseline = Mode::ns;
    Mode other = Mode::ns;
    std::vector<RatioRow> rows;
    std::optional<double> crossover;   ///< interpolated delta size where the ratio reaches 1
};

inline double median(std::vector<double> v)
{
    if (v.empty()) return 0;
    std::sort(v.begin(), v.end());
    std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : (v[m - 1] + v[m]) / 2;
}

/** First delta size at which the ratio series reaches 1, interpolated linearly between neighbouring sizes. */
inline std::optional<double> crossover(const std::vector<RatioRow> &rows)
{
    for (std::size_t i = 0; i != rows.size(); ++i) {
        if (rows[i].ratio < 1) continue;
        if (i == 0) return static_cast<double>(rows[0].delta_rows);
        const auto &a = rows[i - 1], &b = rows[i];
        double t = (1 - a.ratio) / (b.ratio - a.ratio);
        return static_cast<double>(a.delta_rows) + t * static_cast<double>(b.delta_rows - a.delta_rows);
    }
    return std::nullopt;
}

/** Compares two reports of the same workload.  Reports must agree on everything but timing and mode; otherwise
 * `mismatched_workloads` is raised.  Only queries that saw updates since their last run enter the ratios. */
inline Comparison compare_reports(const RunReport &baseline, const RunReport &other)
{
    if (baseline.rows.size() != other.rows.size())
        throw mismatched_workloads("reports have " + std::to_string(baseline.rows.size()) + " and " +
                                   std::to_string(other.rows.size()) + " operations");
    Comparison c;
    if (not baseline.rows.empty()) {
        c.baseline = baseline.rows.front().mode;
        c.other = other.rows.front().mode;
    }
    std::map<std::int64_t, std::pair<std::vector<double>, std::vector<double>>> by_delta;
    for (std::size_t i = 0; i != baseline.rows.size(); ++i) {
        const auto &a = baseline.rows[i], &b = other.rows[i];
        if (not a.same_outcome(b))
            throw mismatched_workloads("operation " + std::to_string(a.index) + " differs between the reports" +
                                       (a.checksum != b.checksum ? " (result checksum)" : ""));
        if (a.kind != "query" or a.delta_rows == 0) continue;
        by_delta[a.delta_rows].first.push_back(static_cast<double>(a.wall_us));
        by_delta[a.delta_rows].second.push_back(static_cast<double>(b.wall_us));
    }
    for (auto &[d, times] : by_delta) {
        RatioRow r;
        r.delta_rows = d;
        r.baseline_us = median(times.first);
        r.other_us = median(times.second);
        r.ratio = r.baseline_us > 0 ? r.other_us / r.baseline_us : (r.other_us > 0 ? INFINITY : 1.0);
        c.rows.push_back(r);
    }
    c.crossover = crossover(c.rows);
    return c;
}

inline void write_comparison(std::ostream &out, const Comparison &c)
{
    out << "delta_rows,baseline,baseline_us,other,other_us,ratio\n";
    for (const auto &r : c.rows)
        out << r.delta_rows << ',' << mode_name(c.baseline) << ',' << r.baseline_us << ',' << mode_name(c.other) << ','
            << r.other_us << ',' << r.ratio << '\n';
    out << "crossover,";
    if (c.crossover) out << *c.crossover;
    else out << "none";
    out << '\n';
}

}
