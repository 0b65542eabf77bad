#pragma once

#include <sketchd/annotated.hpp>
#include <sketchd/bind.hpp>
#include <sketchd/bloom.hpp>
#include <sketchd/csv.hpp>
#include <sketchd/error.hpp>
#include <sketchd/eval.hpp>
#include <sketchd/partition.hpp>
#include <sketchd/relation.hpp>

#include <algorithm>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>


namespace sketchd {

using VersionId = std::uint64_t;

/** One column of a chunk. */
using Column = std::variant<std::vector<std::int64_t>, std::vector<double>, std::vector<std::string>>;

/** Horizontal slice of a table stored column by column. */
struct Chunk
{
    std::vector<Column> columns;
    std::size_t rows = 0;

    explicit Chunk(const Schema &s, std::size_t capacity) {
        for (const auto &a : s.attributes) {
            switch (a.kind) {
                case Kind::i64: columns.emplace_back(std::vector<std::int64_t>()); break;
                case Kind::f64: columns.emplace_back(std::vector<double>()); break;
                case Kind::str: columns.emplace_back(std::vector<std::string>()); break;
            }
            std::visit([&](auto &c) { c.reserve(capacity); }, columns.back());
        }
    }

    void append(const Tuple &t) {
        for (std::size_t i = 0; i != columns.size(); ++i) {
            std::visit([&](auto &c) {
                using T = typename std::decay_t<decltype(c)>::value_type;
                if constexpr (std::is_same_v<T, std::int64_t>) c.push_back(t[i].as_int());
                else if constexpr (std::is_same_v<T, double>) c.push_back(t[i].as_float());
                else c.push_back(t[i].as_string());
            }, columns[i]);
        }
        ++rows;
    }

    /** Overwrites `t` (of the right arity) with row `r`. */
    void read(std::size_t r, Tuple &t) const {
        for (std::size_t i = 0; i != columns.size(); ++i)
            std::visit([&](const auto &c) { t[i] = c[r]; }, columns[i]);
    }
};

/** A relation as base rows (version 0) in columnar chunks plus an append-only log of versioned delta tuples. */
class VersionedTable
{
    public:
    static constexpr std::size_t chunk_capacity = 4096;

    private:
    Schema schema_;
    std::vector<Chunk> chunks_;
    std::size_t base_rows_ = 0;
    std::vector<std::pair<VersionId, DeltaTuple>> log_;
    std::optional<VersionId> first_delete_; ///< version of the earliest delete entry in the log

    // for validating deletes against the current state
    mutable std::vector<std::pair<std::uint64_t, std::uint32_t>> base_index_; ///< (row hash, row id), sorted
    mutable bool base_indexed_ = false;
    std::unordered_map<Tuple, std::int64_t, TupleHash> log_net_;

    void index_base() const {
        if (base_indexed_) return;
        base_index_.clear();
        base_index_.reserve(base_rows_);
        Tuple t(schema_.arity());
        std::uint32_t id = 0;
        for (const auto &c : chunks_)
            for (std::size_t r = 0; r != c.rows; ++r, ++id) {
                c.read(r, t);
                base_index_.emplace_back(hash_tuple(t), id);
            }
        std::sort(base_index_.begin(), base_index_.end());
        base_indexed_ = true;
    }

    void read_row(std::uint32_t id, Tuple &t) const { chunks_[id / chunk_capacity].read(id % chunk_capacity, t); }

    public:
    VersionedTable() = default;
    explicit VersionedTable(Schema s) : schema_(std::move(s)) { }

    const Schema & schema() const { return schema_; }
    std::size_t base_rows() const { return base_rows_; }
    const std::vector<std::pair<VersionId, DeltaTuple>> & log() const { return log_; }
    const std::vector<Chunk> & chunks() const { return chunks_; }

    void append_base(const Tuple &t, std::int64_t n = 1) {
        schema_.check(t);
        for (std::int64_t i = 0; i < n; ++i) {
            if (chunks_.empty() or chunks_.back().rows == chunk_capacity) chunks_.emplace_back(schema_, chunk_capacity);
            chunks_.back().append(t);
            ++base_rows_;
        }
        base_indexed_ = false;
    }

    /** Multiplicity of `t` in the current (latest) state. */
    std::int64_t current_multiplicity(const Tuple &t) const {
        index_base();
        std::int64_t n = 0;
        std::uint64_t h = hash_tuple(t);
        auto lo = std::lower_bound(base_index_.begin(), base_index_.end(), std::make_pair(h, std::uint32_t{0}));
        Tuple row(schema_.arity());
        for (auto it = lo; it != base_index_.end() and it->first == h; ++it) {
            read_row(it->second, row);
            if (row == t) ++n;
        }
        if (auto it = log_net_.find(t); it != log_net_.end()) n += it->second;
        return n;
    }

    void append_log(VersionId v, const DeltaTuple &d) {
        schema_.check(d.tuple);
        if (d.tag == DeltaTag::remove and not first_delete_) first_delete_ = v;
        auto &n = log_net_[d.tuple];
        n += d.tag == DeltaTag::insert ? d.multiplicity : -d.multiplicity;
        if (n == 0) log_net_.erase(d.tuple);
        log_.emplace_back(v, d);
    }

    /** Whether the log holds a delete entry with version in (from, to]. */
    bool deletes_between(VersionId from, VersionId to) const {
        if (not first_delete_ or *first_delete_ > to) return false;
        auto lo = std::upper_bound(log_.begin(), log_.end(), from, [](VersionId v, const auto &e) { return v < e.first; });
        for (auto it = lo; it != log_.end() and it->first <= to; ++it)
            if (it->second.tag == DeltaTag::remove) return true;
        return false;
    }

    /** Log entries with version in (from, to]. */
    std::pair<std::size_t, std::size_t> log_range(VersionId from, VersionId to) const {
        auto lo = std::upper_bound(log_.begin(), log_.end(), from, [](VersionId v, const auto &e) { return v < e.first; });
        auto hi = std::upper_bound(log_.begin(), log_.end(), to, [](VersionId v, const auto &e) { return v < e.first; });
        return {static_cast<std::size_t>(lo - log_.begin()), static_cast<std::size_t>(hi - log_.begin())};
    }

    /** Streams the state at version `v` (each row with multiplicity 1, except consolidated log inserts). */
    void scan(VersionId v, const RowVisitor &visit) const {
        auto [lo, hi] = log_range(0, v);
        Tuple t(schema_.arity());
        if (not deletes_between(0, v)) {
            for (const auto &c : chunks_)
                for (std::size_t r = 0; r != c.rows; ++r) {
                    c.read(r, t);
                    visit(t, 1);
                }
            for (std::size_t i = lo; i != hi; ++i) visit(log_[i].second.tuple, log_[i].second.multiplicity);
            return;
        }
        std::unordered_map<Tuple, std::int64_t, TupleHash> net;
        for (std::size_t i = lo; i != hi; ++i) {
            const auto &d = log_[i].second;
            net[d.tuple] += d.tag == DeltaTag::insert ? d.multiplicity : -d.multiplicity;
        }
        // commits validate deletes through the base index, so it exists here
        std::vector<bool> gone(base_rows_);
        Tuple probe(schema_.arity());
        for (auto &[dt, n] : net) {
            if (n >= 0) continue;
            std::uint64_t h = hash_tuple(dt);
            auto it = std::lower_bound(base_index_.begin(), base_index_.end(), std::make_pair(h, std::uint32_t{0}));
            for (; n < 0 and it != base_index_.end() and it->first == h; ++it) {
                read_row(it->second, probe);
                if (probe != dt) continue;
                gone[it->second] = true;
                ++n;
            }
        }
        std::size_t id = 0;
        for (const auto &c : chunks_)
            for (std::size_t r = 0; r != c.rows; ++r, ++id) {
                if (gone[id]) continue;
                c.read(r, t);
                visit(t, 1);
            }
        for (std::size_t i = lo; i != hi; ++i) {
            const auto &d = log_[i].second;
            if (d.tag != DeltaTag::insert) continue;
            auto it = net.find(d.tuple);
            if (it->second <= 0) continue;
            visit(d.tuple, it->second);
            it->second = 0;
        }
    }

    /** Net delta between two versions, in log order. */
    DeltaRelation extract(VersionId from, VersionId to, const CompiledPredicate *filter) const {
        DeltaRelation out(schema_);
        auto [lo, hi] = log_range(from, to);
        if (not deletes_between(from, to)) {
            out.rows.reserve(hi - lo);
            for (std::size_t i = lo; i != hi; ++i)
                if (not filter or (*filter)(log_[i].second.tuple)) out.rows.push_back(log_[i].second);
            return out;
        }
        std::unordered_map<Tuple, std::int64_t, TupleHash> net;
        for (std::size_t i = lo; i != hi; ++i) {
            const auto &d = log_[i].second;
            if (filter and not (*filter)(d.tuple)) continue;
            net[d.tuple] += d.tag == DeltaTag::insert ? d.multiplicity : -d.multiplicity;
        }
        for (std::size_t i = lo; i != hi; ++i) {
            auto it = net.find(log_[i].second.tuple);
            if (it == net.end() or it->second == 0) continue;
            if (it->second > 0) out.insert(it->first, it->second);
            else out.remove(it->first, -it->second);
            it->second = 0;
        }
        return out;
    }
};

/** Versioned in-memory store: a set of tables sharing one monotone version counter.  Readers take a shared lock, commits
 * an exclusive one. */
class Store : public RowSource
{
    mutable std::shared_mutex mutex_;
    std::map<std::string, VersionedTable, std::less<>> tables_;
    VersionId version_ = 0;

    const VersionedTable & table(std::string_view name) const {
        auto it = tables_.find(name);
        if (it == tables_.end()) throw unknown_relation("unknown relation '" + std::string(name) + "'");
        return it->second;
    }

    void check_version(VersionId v) const {
        if (v > version_)
            throw unknown_version("version " + std::to_string(v) + " is newer than the current version " +
                                  std::to_string(version_));
    }

    public:
    Store() = default;
    Store(const Store&) = delete;
    Store & operator=(const Store&) = delete;

    void create_table(const Schema &schema) {
        std::unique_lock lock(mutex_);
        if (tables_.contains(schema.name)) throw duplicate_name("table '" + schema.name + "' already exists");
        tables_.emplace(schema.name, VersionedTable(schema));
    }

    bool has_table(std::string_view name) const {
        std::shared_lock lock(mutex_);
        return tables_.contains(name);
    }

    std::vector<std::string> table_names() const {
        std::shared_lock lock(mutex_);
        std::vector<std::string> out;
        for (const auto &[n, _] : tables_) out.push_back(n);
        return out;
    }

    /** Appends rows to the version-0 base of a table.  Only allowed before the first commit. */
    void load_rows(std::string_view name, const std::vector<Tuple> &rows) {
        std::unique_lock lock(mutex_);
        if (version_ != 0) throw already_committed("cannot bulk-load '" + std::string(name) + "' after commits");
        auto it = tables_.find(name);
        if (it == tables_.end()) throw unknown_relation("unknown relation '" + std::string(name) + "'");
        for (const auto &t : rows) it->second.append_base(t);
    }

    void load(const BagRelation &rel) {
        std::unique_lock lock(mutex_);
        if (version_ != 0) throw already_committed("cannot bulk-load '" + rel.schema.name + "' after commits");
        auto it = tables_.find(rel.schema.name);
        if (it == tables_.end()) throw unknown_relation("unknown relation '" + rel.schema.name + "'");
        if (not it->second.schema().compatible(rel.schema))
            throw schema_mismatch("rows do not match the schema of '" + rel.schema.name + "'");
        for (const auto &[t, n] : rel.rows) it->second.append_base(t, n);
    }

    /** Creates (unless present) and bulk-loads a table from a relation CSV, streaming the rows. */
    void load_csv(std::istream &in, const std::string &name) {
        std::unique_lock lock(mutex_);
        if (version_ != 0) throw already_committed("cannot bulk-load '" + name + "' after commits");
        VersionedTable *tbl = nullptr;
        csv::read(in, name,
                  [&](const Schema &s) {
                      auto it = tables_.find(name);
                      if (it == tables_.end()) it = tables_.emplace(name, VersionedTable(s)).first;
                      else if (not it->second.schema().compatible(s))
                          throw schema_mismatch("CSV header does not match the schema of '" + name + "'");
                      tbl = &it->second;
                  },
                  [&](const Tuple &t) { tbl->append_base(t); });
    }

    /** Appends a batch atomically and returns the new version.  An empty batch still creates a version. */
    VersionId commit(const DeltaDatabase &batch) {
        std::unique_lock lock(mutex_);
        for (const auto &[name, d] : batch.relations) {
            const auto &tbl = table(name);
            if (not d.schema.attributes.empty() and not tbl.schema().compatible(d.schema))
                throw schema_mismatch("delta schema does not match '" + name + "'");
            std::unordered_map<Tuple, std::int64_t, TupleHash> deleted;
            for (const auto &r : d.rows) {
                if (r.multiplicity < 1) throw ill_formed_delta("delta multiplicity must be positive");
                tbl.schema().check(r.tuple);
                if (r.tag == DeltaTag::remove) deleted[r.tuple] += r.multiplicity;
            }
            for (const auto &[t, n] : deleted)
                if (tbl.current_multiplicity(t) < n)
                    throw ill_formed_delta("cannot delete " + std::to_string(n) + " copies of " + to_string(t) +
                                           " from '" + name + "'");
        }
        VersionId v = ++version_;
        for (const auto &[name, d] : batch.relations) {
            auto &tbl = tables_.find(name)->second;
            for (const auto &r : d.rows) tbl.append_log(v, r);
        }
        return v;
    }

    VersionId version() const {
        std::shared_lock lock(mutex_);
        return version_;
    }

    const Schema & schema(std::string_view relation) const override {
        std::shared_lock lock(mutex_);
        return table(relation).schema();
    }

    /** Streams the current state. */
    void scan(std::string_view relation, const RowVisitor &visit) const override {
        std::shared_lock lock(mutex_);
        table(relation).scan(version_, visit);
    }

    void scan(std::string_view relation, VersionId v, const RowVisitor &visit) const {
        std::shared_lock lock(mutex_);
        check_version(v);
        table(relation).scan(v, visit);
    }

    BagRelation scan_snapshot(std::string_view relation, VersionId v) const {
        std::shared_lock lock(mutex_);
        check_version(v);
        const auto &tbl = table(relation);
        BagRelation out(tbl.schema());
        tbl.scan(v, [&](const Tuple &t, std::int64_t n) { out.add(t, n); });
        return out;
    }

    /** Materializes every table at version `v`. */
    Database database(VersionId v) const {
        Database db;
        for (const auto &name : table_names()) db.add(scan_snapshot(name, v));
        return db;
    }

    /** Net delta of `relation` between two versions.  With a predicate, only tuples satisfying it are returned. */
    DeltaRelation extract_delta(std::string_view relation, VersionId from, VersionId to,
                                const std::optional<Predicate> &pushed = std::nullopt) const {
        std::shared_lock lock(mutex_);
        check_version(to);
        if (from > to) throw unknown_version("extraction range is reversed");
        const auto &tbl = table(relation);
        if (pushed and not pushed->is_true()) {
            CompiledPredicate p(*pushed, tbl.schema());
            return tbl.extract(from, to, &p);
        }
        return tbl.extract(from, to, nullptr);
    }

    std::size_t log_size(std::string_view relation) const {
        std::shared_lock lock(mutex_);
        return table(relation).log().size();
    }

    /** Writes the delta log of a relation as CSV: version, tag, multiplicity, then the row. */
    void export_log_csv(std::string_view relation, std::ostream &out) const {
        std::shared_lock lock(mutex_);
        const auto &tbl = table(relation);
        out << "version:i64,tag:str,multiplicity:i64";
        if (tbl.schema().arity()) out << ',' << csv::format_header(tbl.schema());
        out << '\n';
        for (const auto &[v, d] : tbl.log())
            out << v << ',' << tag_char(d.tag) << ',' << d.multiplicity << (d.tuple.empty() ? "" : ",")
                << csv::format_row(d.tuple) << '\n';
    }
};

/** Read-only view of a store at a fixed version. */
class StoreSnapshot : public RowSource
{
    const Store &store_;
    VersionId version_;

    public:
    StoreSnapshot(const Store &store, VersionId v) : store_(store), version_(v) {
        if (v > store.version()) throw unknown_version("version " + std::to_string(v) + " does not exist yet");
    }

    VersionId version() const { return version_; }
    const Schema & schema(std::string_view relation) const override { return store_.schema(relation); }
    void scan(std::string_view relation, const RowVisitor &visit) const override {
        store_.scan(relation, version_, visit);
    }
};

enum class JoinSide : std::uint8_t { left, right };

/** Joins an annotated delta with the annotated contents of `relation` at version `at`.  `side` is the side the delta
 * is on; `predicate` refers to the attributes of both inputs.  Equality conjuncts use a hash join. */
inline AnnotatedDelta join_delta_with_table(const Store &store, const AnnotatedDelta &delta, const std::string &relation,
                                            JoinSide side, VersionId at, const Predicate &predicate,
                                            const PartitionCatalog &catalog, const BloomFilter *bloom = nullptr)
{
    const Schema &table_schema = store.schema(relation);
    BoundNode join;
    join.kind = NodeKind::join;
    {
        // bind the join against a two-relation schema catalog
        struct Schemas : RowSource
        {
            Schema l, r;
            const Schema & schema(std::string_view n) const override { return n == l.name ? l : r; }
            void scan(std::string_view, const RowVisitor&) const override { }
        } schemas;
        schemas.l = side == JoinSide::left ? delta.schema : table_schema;
        schemas.r = side == JoinSide::left ? table_schema : delta.schema;
        schemas.l.name = "\x01left";
        schemas.r.name = "\x01right";
        join = bind(sketchd::join(table(schemas.l.name), table(schemas.r.name), predicate), schemas);
    }
    bool delta_left = side == JoinSide::left;
    auto delta_key = [&](const Tuple &t) { return delta_left ? join.join_key_left(t) : join.join_key_right(t); };

    AnnotatedDelta out{join.schema, {}};
    if (delta.rows.empty()) return out;
    const AnnotatedDelta *probe = &delta;
    AnnotatedDelta filtered;
    if (bloom and not join.equi_keys.empty()) {
        filtered = prefilter_join_delta(delta, *bloom, delta_key);
        probe = &filtered;
        if (probe->rows.empty()) return out;
    }
    std::unordered_map<Tuple, std::vector<std::size_t>, TupleHash> hashed;
    for (std::size_t i = 0; i != probe->rows.size(); ++i) hashed[delta_key(probe->rows[i].tuple)].push_back(i);
    Annotator ann(catalog, table_schema);
    store.scan(relation, at, [&](const Tuple &t, std::int64_t n) {
        auto it = hashed.find(delta_left ? join.join_key_right(t) : join.join_key_left(t));
        if (it == hashed.end()) return;
        Sketch p = ann(t);
        for (auto i : it->second) {
            const auto &a = probe->rows[i];
            Tuple joined = delta_left ? detail::concat(a.tuple, t) : detail::concat(t, a.tuple);
            if (not join.predicate(joined)) continue;
            out.rows.push_back({std::move(joined), a.sketch | p, a.multiplicity * n, a.tag});
        }
    });
    return out;
}

}
