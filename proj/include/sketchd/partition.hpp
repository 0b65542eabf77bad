#pragma once

#include <sketchd/error.hpp>
#include <sketchd/plan.hpp>
#include <sketchd/relation.hpp>
#include <sketchd/sketch.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>


namespace sketchd {

/** Interval of values.  The upper end is inclusive unless `high_open` is set (float and string ranges other than the
 * last of a partition). */
struct Range
{
    Value low;
    Value high;
    bool high_open = false;

    bool contains(const Value &v) const {
        if (v < low) return false;
        return high_open ? v < high : v <= high;
    }

    friend bool operator==(const Range&, const Range&) = default;
};

inline std::ostream & operator<<(std::ostream &out, const Range &r)
{
    return out << '[' << r.low << ", " << r.high << (r.high_open ? ')' : ']');
}

inline Value domain_min(Kind k)
{
    switch (k) {
        case Kind::i64: return Value(std::numeric_limits<std::int64_t>::min());
        case Kind::f64: return Value(std::numeric_limits<double>::lowest());
        case Kind::str: return Value(std::string());
    }
    return {};
}

/** Largest value of a kind.  Strings have none; four copies of U+10FFFF (the largest code point, kept valid UTF-8
 * so it survives JSON) serve as the upper sentinel. */
inline Value domain_max(Kind k)
{
    switch (k) {
        case Kind::i64: return Value(std::numeric_limits<std::int64_t>::max());
        case Kind::f64: return Value(std::numeric_limits<double>::max());
        case Kind::str: {
            std::string s;
            for (int i = 0; i != 4; ++i) s += "\xf4\x8f\xbf\xbf";
            return Value(std::move(s));
        }
    }
    return {};
}

/** Partition of one attribute's domain into consecutive ranges, given by n+1 strictly increasing boundaries.  Integer
 * ranges are [b_i, b_{i+1}-1] with the last one [b_{n-1}, b_n]; float and string ranges are [b_i, b_{i+1}) with the last
 * one closed. */
class RangePartition
{
    std::string relation_;
    std::string attribute_;
    Kind kind_ = Kind::i64;
    std::vector<Value> boundaries_;

    public:
    RangePartition() = default;

    RangePartition(std::string relation, std::string attribute, std::vector<Value> boundaries)
        : relation_(std::move(relation))
        , attribute_(std::move(attribute))
        , boundaries_(std::move(boundaries))
    {
        if (boundaries_.size() < 2)
            throw invalid_plan("partition of '" + relation_ + "." + attribute_ + "' needs at least two boundaries");
        kind_ = boundaries_.front().kind();
        for (std::size_t i = 0; i != boundaries_.size(); ++i) {
            if (boundaries_[i].kind() != kind_)
                throw kind_mismatch("partition boundaries of '" + relation_ + "." + attribute_ + "' mix kinds");
            if (boundaries_[i].is_float() and not std::isfinite(boundaries_[i].as_float()))
                throw out_of_domain("partition boundaries must be finite");
            if (i and not (boundaries_[i - 1] < boundaries_[i]))
                throw invalid_plan("partition boundaries of '" + relation_ + "." + attribute_ +
                                   "' must be strictly increasing");
        }
    }

    /** A single range covering the whole domain of `kind`. */
    static RangePartition whole_domain(std::string relation, std::string attribute, Kind kind) {
        return RangePartition(std::move(relation), std::move(attribute), {domain_min(kind), domain_max(kind)});
    }

    const std::string & relation() const { return relation_; }
    const std::string & attribute() const { return attribute_; }
    Kind kind() const { return kind_; }
    const std::vector<Value> & boundaries() const { return boundaries_; }
    std::size_t size() const { return boundaries_.size() - 1; }

    Range range(std::size_t i) const {
        bool last = i + 1 == size();
        if (kind_ == Kind::i64) {
            std::int64_t hi = boundaries_[i + 1].as_int();
            return {boundaries_[i], Value(last ? hi : hi - 1), false};
        }
        return {boundaries_[i], boundaries_[i + 1], not last};
    }

    std::vector<Range> ranges() const {
        std::vector<Range> out;
        for (std::size_t i = 0; i != size(); ++i) out.push_back(range(i));
        return out;
    }

    /** Index of the range containing `v`, by binary search over the boundaries. */
    std::size_t locate(const Value &v) const {
        if (v.kind() != kind_)
            throw kind_mismatch("value of kind " + std::string(kind_name(v.kind())) + " for partition on '" +
                                relation_ + "." + attribute_ + "' of kind " + std::string(kind_name(kind_)));
        if (v.is_float() and std::isnan(v.as_float())) throw out_of_domain("NaN has no fragment");
        if (v < boundaries_.front() or boundaries_.back() < v)
            throw out_of_domain(v.to_string() + " is outside the partitioned domain of '" + relation_ + "." +
                                attribute_ + "'");
        auto it = std::upper_bound(boundaries_.begin(), boundaries_.end(), v);
        std::size_t i = static_cast<std::size_t>(it - boundaries_.begin()) - 1;
        return std::min(i, size() - 1);
    }

    friend bool operator==(const RangePartition&, const RangePartition&) = default;
};

/** Equi-depth boundaries over `values` (need not be sorted), stretched to the whole domain of `kind`. */
inline RangePartition equi_depth(std::string relation, std::string attribute, Kind kind, std::vector<Value> values,
                                 std::size_t fragments = 128)
{
    std::sort(values.begin(), values.end());
    std::vector<Value> b{domain_min(kind)};
    for (std::size_t i = 1; i < fragments and not values.empty(); ++i) {
        const Value &q = values[i * values.size() / fragments];
        if (b.back() < q) b.push_back(q);
    }
    Value top = domain_max(kind);
    if (not (b.back() < top)) b.pop_back();
    b.push_back(std::move(top));
    return RangePartition(std::move(relation), std::move(attribute), std::move(b));
}

/** The set of partitions for a database.  Fragment ids are dense: each relation owns a contiguous block, assigned in
 * order of registration. */
class PartitionCatalog
{
    std::vector<RangePartition> partitions_;
    std::vector<FragmentId> offsets_;
    std::map<std::string, std::size_t, std::less<>> by_relation_;
    FragmentId total_ = 0;

    public:
    PartitionCatalog() = default;
    explicit PartitionCatalog(std::vector<RangePartition> ps) { for (auto &p : ps) add(std::move(p)); }

    void add(RangePartition p) {
        if (by_relation_.contains(p.relation()))
            throw duplicate_name("relation '" + p.relation() + "' is already partitioned");
        by_relation_.emplace(p.relation(), partitions_.size());
        offsets_.push_back(total_);
        total_ += static_cast<FragmentId>(p.size());
        partitions_.push_back(std::move(p));
    }

    /** Adds whole-domain partitions for every relation of `relations` that has none yet. */
    void cover(const std::vector<std::string> &relations, const RowSource &schemas) {
        for (const auto &r : relations)
            if (not has(r)) {
                const Schema &s = schemas.schema(r);
                if (s.attributes.empty()) throw schema_mismatch("relation '" + r + "' has no attributes");
                add(RangePartition::whole_domain(r, s.attributes.front().name, s.attributes.front().kind));
            }
    }

    bool has(std::string_view relation) const { return by_relation_.contains(relation); }

    const RangePartition & partition(std::string_view relation) const {
        auto it = by_relation_.find(relation);
        if (it == by_relation_.end()) throw unknown_relation("no partition for relation '" + std::string(relation) + "'");
        return partitions_[it->second];
    }

    FragmentId offset(std::string_view relation) const {
        auto it = by_relation_.find(relation);
        if (it == by_relation_.end()) throw unknown_relation("no partition for relation '" + std::string(relation) + "'");
        return offsets_[it->second];
    }

    const std::vector<RangePartition> & partitions() const { return partitions_; }

    /** Total number of fragments F. */
    std::size_t fragment_count() const { return total_; }

    /** All fragments of one relation. */
    Sketch fragments_of(std::string_view relation) const {
        Sketch s;
        FragmentId off = offset(relation);
        for (std::size_t i = 0; i != partition(relation).size(); ++i) s.set(off + static_cast<FragmentId>(i));
        return s;
    }

    /** Inverse of the id assignment: (relation, range index). */
    std::pair<const RangePartition*, std::size_t> resolve(FragmentId f) const {
        if (f >= total_) throw out_of_domain("fragment id " + std::to_string(f) + " is not registered");
        auto it = std::upper_bound(offsets_.begin(), offsets_.end(), f);
        std::size_t p = static_cast<std::size_t>(it - offsets_.begin()) - 1;
        return {&partitions_[p], f - offsets_[p]};
    }

    friend bool operator==(const PartitionCatalog &a, const PartitionCatalog &b) { return a.partitions_ == b.partitions_; }
};

/** Fragment id of value `v` under the partition of `relation`. */
inline FragmentId fragment_of(const PartitionCatalog &catalog, std::string_view relation, const Value &v)
{
    return catalog.offset(relation) + static_cast<FragmentId>(catalog.partition(relation).locate(v));
}

/** Resolves a relation's partition attribute to its position in `schema`. */
class Annotator
{
    FragmentId offset_ = 0;
    const RangePartition *partition_ = nullptr;
    std::size_t attr_ = 0;

    public:
    Annotator() = default;
    Annotator(const PartitionCatalog &catalog, const Schema &schema)
        : offset_(catalog.offset(schema.name))
        , partition_(&catalog.partition(schema.name))
        , attr_(schema.index_of(partition_->attribute()))
    {
        if (schema.attributes[attr_].kind != partition_->kind())
            throw kind_mismatch("partition of '" + schema.name + "' does not match the kind of attribute '" +
                                partition_->attribute() + "'");
    }

    std::size_t attribute() const { return attr_; }
    FragmentId fragment(const Tuple &t) const { return offset_ + static_cast<FragmentId>(partition_->locate(t[attr_])); }
    Sketch operator()(const Tuple &t) const { return Sketch::singleton(fragment(t)); }
};

/** Minimal list of maximal intervals covering exactly the fragments of `relation` in `p`. */
inline std::vector<Range> compress_ranges(const Sketch &p, const PartitionCatalog &catalog, std::string_view relation)
{
    const auto &part = catalog.partition(relation);
    FragmentId off = catalog.offset(relation);
    std::vector<Range> out;
    std::size_t i = 0;
    while (i != part.size()) {
        if (not p.test(off + static_cast<FragmentId>(i))) { ++i; continue; }
        std::size_t j = i;
        while (j + 1 != part.size() and p.test(off + static_cast<FragmentId>(j + 1))) ++j;
        Range lo = part.range(i), hi = part.range(j);
        out.push_back({lo.low, hi.high, hi.high_open});
        i = j + 1;
    }
    return out;
}

/** Selection predicate on `attribute` equivalent to membership in one of `ranges`. */
inline Predicate range_predicate(const std::string &attribute, const std::vector<Range> &ranges)
{
    std::vector<Predicate> disjuncts;
    for (const auto &r : ranges) {
        Predicate hi = r.high_open ? col(attribute) < Expr(r.high) : col(attribute) <= Expr(r.high);
        disjuncts.push_back((col(attribute) >= Expr(r.low)) && std::move(hi));
    }
    return Predicate::any_of(std::move(disjuncts));
}

/** Keeps, per relation, exactly the rows whose partition value lies in a fragment of `p`. */
inline Database sketch_instance(const Sketch &p, const Database &db, const PartitionCatalog &catalog)
{
    Database out;
    for (const auto &[name, rel] : db.relations) {
        if (not catalog.has(name)) { out.add(rel); continue; }
        Annotator ann(catalog, rel.schema);
        BagRelation kept(rel.schema);
        for (const auto &[t, n] : rel.rows)
            if (p.test(ann.fragment(t))) kept.add(t, n);
        out.add(std::move(kept));
    }
    return out;
}

}
