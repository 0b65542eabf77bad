#pragma once

#include <sketchd/csv.hpp>
#include <sketchd/relation.hpp>
#include <sketchd/value.hpp>

#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <string>
#include <vector>


namespace sketchd::workload {

/** Parameters of the synthetic table.  Every row is a pure function of (seed, id), so rows can be regenerated for
 * deletions without keeping the table around. */
struct SyntheticSpec
{
    std::string relation = "r";
    std::int64_t rows = 1000;
    std::int64_t groups = 50;
    std::uint64_t seed = 1;
    double sigma = 0.0;   ///< standard deviation of the noise added to the correlated columns
};

/** id, a (group key), b..e (linear in a plus noise), f..j (uniform). */
inline Schema synthetic_schema(const std::string &relation)
{
    std::vector<Attribute> attrs{{"id", Kind::i64}, {"a", Kind::i64}};
    for (const char *c : {"b", "c", "d", "e", "f", "g", "h", "i", "j"}) attrs.push_back({c, Kind::i64});
    return Schema(relation, std::move(attrs));
}

inline constexpr std::int64_t synthetic_uniform_max = 1'000'000;

/** Row `id` of the synthetic table.  The first `groups` ids take each group value once, so every group is present as
 * soon as there are at least `groups` rows. */
inline Tuple synthetic_row(const SyntheticSpec &spec, std::int64_t id)
{
    std::mt19937_64 rng(sketchd::detail::mix64(spec.seed * 0x9e3779b97f4a7c15ULL ^ static_cast<std::uint64_t>(id)));
    std::int64_t a = id >= 0 and id < spec.groups
                         ? id
                         : static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(spec.groups));
    Tuple t{Value(id), Value(a)};
    std::normal_distribution<double> noise(0.0, spec.sigma > 0 ? spec.sigma : 1.0);
    for (std::int64_t k = 1; k <= 4; ++k) {
        double x = static_cast<double>(a * k * 10);
        if (spec.sigma > 0) x += noise(rng);
        t.push_back(Value(static_cast<std::int64_t>(std::llround(x))));
    }
    for (int k = 0; k != 5; ++k)
        t.push_back(Value(static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(synthetic_uniform_max))));
    return t;
}

inline void check_spec(const SyntheticSpec &spec)
{
    if (spec.rows < 1 or spec.groups < 1) throw error("synthetic tables need at least one row and one group");
    if (spec.sigma < 0 or not std::isfinite(spec.sigma)) throw error("noise deviation must be finite and non-negative");
}

/** Writes the table as CSV with a typed header. */
inline void generate_synthetic(const SyntheticSpec &spec, std::ostream &out)
{
    check_spec(spec);
    out << csv::format_header(synthetic_schema(spec.relation)) << '\n';
    for (std::int64_t id = 0; id != spec.rows; ++id) out << csv::format_row(synthetic_row(spec, id)) << '\n';
}

inline std::vector<Tuple> synthetic_rows(const SyntheticSpec &spec, std::int64_t from, std::int64_t count)
{
    std::vector<Tuple> out;
    out.reserve(static_cast<std::size_t>(count));
    for (std::int64_t id = from; id != from + count; ++id) out.push_back(synthetic_row(spec, id));
    return out;
}

}
