#pragma once

#include <sketchd/annotated.hpp>
#include <sketchd/codec.hpp>
#include <sketchd/engine/engine.hpp>
#include <sketchd/engine/snapshot.hpp>
#include <sketchd/eval.hpp>
#include <sketchd/pushdown.hpp>
#include <sketchd/store.hpp>

#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>


namespace sketchd {

/** A plan with the constants of its selections replaced by numbered placeholders.  Constants of selections above an
 * aggregation or top-k (HAVING conditions) and the k of top-k operators are kept apart in `relaxable`. */
struct QueryTemplate
{
    std::string key;
    std::vector<Value> constants;
    std::vector<Value> relaxable;

    bool matches_exactly(const QueryTemplate &o) const {
        return key == o.key and constants == o.constants and relaxable == o.relaxable;
    }
    bool matches_relaxed(const QueryTemplate &o) const { return key == o.key and constants == o.constants; }

    friend bool operator==(const QueryTemplate&, const QueryTemplate&) = default;
};

namespace detail {

inline bool has_stateful_below(const codec::json &j)
{
    if (not j.is_object()) return false;
    if (j.contains("aggregate") or j.contains("topk")) return true;
    for (const char *c : {"input", "left", "right", "merge"})
        if (j.contains(c) and has_stateful_below(j.at(c))) return true;
    return false;
}

inline void abstract_constants(codec::json &pred, std::vector<Value> &out, std::size_t &next)
{
    if (pred.is_object()) {
        if (pred.contains("const")) {
            out.push_back(codec::value_from_json(pred.at("const")));
            pred = {{"param", next++}};
            return;
        }
        for (auto &[_, v] : pred.items()) abstract_constants(v, out, next);
    } else if (pred.is_array()) {
        for (auto &v : pred) abstract_constants(v, out, next);
    } else if (pred.is_number()) {
        // bare numbers are constant shorthands
        out.push_back(codec::value_from_json(pred));
        pred = {{"param", next++}};
    }
}

inline void abstract_plan(codec::json &j, QueryTemplate &t, std::size_t &next)
{
    if (not j.is_object()) return;
    if (j.contains("select")) {
        bool having = has_stateful_below(j.at("input"));
        abstract_constants(j.at("select"), having ? t.relaxable : t.constants, next);
    }
    if (j.contains("topk")) {
        auto &k = j.at("topk").at("k");
        t.relaxable.push_back(Value(k.get<std::int64_t>()));
        k = {{"param", next++}};
    }
    for (const char *c : {"input", "left", "right", "merge"})
        if (j.contains(c)) abstract_plan(j.at(c), t, next);
}

}

inline QueryTemplate template_of(const Plan &plan)
{
    QueryTemplate t;
    codec::json j = codec::to_json(without_merge(plan));
    std::size_t next = 0;
    detail::abstract_plan(j, t, next);
    t.key = j.dump();
    return t;
}

/** Adds, directly above each scan of a partitioned relation, a selection keeping only the ranges of `sketch`.  Throws
 * `empty_sketch` when the sketch has no fragment of any relation of the plan. */
inline Plan instrument_query(const Plan &plan, const Sketch &sketch, const PartitionCatalog &catalog)
{
    bool any = false;
    for (const auto &r : base_relations(plan))
        if (catalog.has(r) and sketch.intersects(catalog.fragments_of(r))) any = true;
    if (not any) throw empty_sketch("the sketch selects no data for this query");
    return rewrite(without_merge(plan), [&](const Plan &n) -> std::optional<Plan> {
        if (n->kind != NodeKind::table or not catalog.has(n->relation)) return std::nullopt;
        const auto &part = catalog.partition(n->relation);
        auto ranges = compress_ranges(sketch, catalog, n->relation);
        if (ranges.empty()) return select(n, Predicate::falsity());
        return select(n, range_predicate(part.attribute(), ranges));
    });
}

struct Strategy
{
    enum class Kind : std::uint8_t { lazy, eager };

    Kind kind = Kind::lazy;
    std::size_t batch_size = 50;

    static Strategy lazy() { return {}; }
    static Strategy eager(std::size_t batch_size = 50) {
        if (batch_size < 1) throw invalid_plan("eager batch size must be at least 1");
        return {Kind::eager, batch_size};
    }

    bool is_eager() const { return kind == Kind::eager; }
};

enum class Reuse : std::uint8_t { exact, relaxed };

struct ManagerConfig
{
    Strategy strategy;
    Reuse reuse = Reuse::exact;
    EngineConfig engine;
    /** Recapture instead of maintaining incrementally. */
    bool full_maintenance = false;
    /** Engine states kept in memory; 0 means no limit.  Others are written to `state_dir`. */
    std::size_t max_resident = 0;
    std::string state_dir;
};

/** A registered sketch. */
struct SketchEntry
{
    std::size_t id = 0;
    QueryTemplate query_template;
    Plan plan;
    PartitionCatalog catalog;
    Sketch sketch;
    VersionId version = 0;
    std::optional<EngineState> state;      ///< empty while evicted
    std::vector<std::pair<VersionId, Sketch>> history;

    std::size_t maintenances = 0;
    std::size_t recaptures = 0;
    std::int64_t last_delta_rows = 0;
    std::uint64_t last_used = 0;
    std::string snapshot_path;

    std::mutex mutex;

    bool resident() const { return state.has_value(); }
};

inline constexpr int entry_format_version = 1;

/** Snapshot of an entry's sketch, version, history and engine state, as JSON text. */
inline std::string persist_state(const SketchEntry &e)
{
    using codec::json;
    if (not e.state) throw error("entry " + std::to_string(e.id) + " has no resident state");
    json history = json::array();
    for (const auto &[v, s] : e.history) history.push_back({{"version", v}, {"sketch", codec::to_json(s)}});
    json j = {
        {"format", "sketchd-entry"},
        {"format_version", entry_format_version},
        {"id", e.id},
        {"version", e.version},
        {"sketch", codec::to_json(e.sketch)},
        {"history", history},
        {"maintenances", e.maintenances},
        {"recaptures", e.recaptures},
        {"state", state_to_json(*e.state)},
    };
    return j.dump(1) + "\n";
}

inline std::unique_ptr<SketchEntry> restore_entry(const std::string &text)
{
    using codec::json;
    try {
        json j = json::parse(text);
        if (j.at("format").get<std::string>() != "sketchd-entry") throw corrupt_snapshot("not a sketch entry");
        if (j.at("format_version").get<int>() != entry_format_version)
            throw corrupt_snapshot("unsupported entry format version");
        auto e = std::make_unique<SketchEntry>();
        e->id = j.at("id").get<std::size_t>();
        e->version = j.at("version").get<VersionId>();
        e->sketch = codec::sketch_from_json(j.at("sketch"));
        for (const auto &h : j.at("history"))
            e->history.emplace_back(h.at("version").get<VersionId>(), codec::sketch_from_json(h.at("sketch")));
        e->maintenances = j.at("maintenances").get<std::size_t>();
        e->recaptures = j.at("recaptures").get<std::size_t>();
        e->state = state_from_json(j.at("state"));
        if (e->state->sketch() != e->sketch or e->state->last_version != e->version)
            throw corrupt_snapshot("entry sketch does not match its engine state");
        e->plan = e->state->plan;
        e->catalog = e->state->catalog;
        e->query_template = template_of(e->plan);
        return e;
    } catch (const corrupt_snapshot&) {
        throw;
    } catch (const codec::json::exception &x) {
        throw corrupt_snapshot(std::string("malformed entry: ") + x.what());
    } catch (const error &x) {
        throw corrupt_snapshot(std::string("inconsistent entry: ") + x.what());
    }
}

/** Outcome of one query answered through the manager. */
struct Answer
{
    BagRelation result;
    std::size_t entry = 0;
    bool captured = false;        ///< a new entry was registered for this query
    bool recaptured = false;      ///< maintenance fell back to (or, in full maintenance mode, was) a recapture
    std::int64_t delta_rows = 0;  ///< delta rows fed to incremental maintenance
    Sketch sketch;
};

/** Sketch registry on top of a versioned store.  Decides per query whether to capture, maintain or just use a
 * sketch, and answers queries through instrumented plans. */
class SketchManager
{
    Store &store_;
    ManagerConfig config_;
    PartitionCatalog catalog_;

    mutable std::mutex registry_;
    std::vector<std::shared_ptr<SketchEntry>> entries_;
    std::uint64_t tick_ = 0;

    std::int64_t pending_rows_ = 0;
    std::set<std::string> pending_relations_;

    std::shared_ptr<SketchEntry> find(const QueryTemplate &t) const {
        std::lock_guard lock(registry_);
        for (const auto &e : entries_)
            if (e->query_template.matches_exactly(t)) return e;
        if (config_.reuse == Reuse::relaxed)
            for (const auto &e : entries_)
                if (e->query_template.matches_relaxed(t)) return e;
        return nullptr;
    }

    std::string snapshot_path(const SketchEntry &e) const {
        return (std::filesystem::path(config_.state_dir) / ("entry-" + std::to_string(e.id) + ".json")).string();
    }

    void touch(SketchEntry &e) {
        std::lock_guard lock(registry_);
        e.last_used = ++tick_;
    }

    /** Requires the entry's lock. */
    void make_resident(SketchEntry &e) {
        if (e.state) return;
        std::ifstream in(e.snapshot_path, std::ios::binary);
        if (not in) throw corrupt_snapshot("cannot read '" + e.snapshot_path + "'");
        std::ostringstream ss;
        ss << in.rdbuf();
        auto restored = restore_entry(ss.str());
        if (restored->version != e.version or restored->sketch != e.sketch)
            throw corrupt_snapshot("snapshot '" + e.snapshot_path + "' is out of date");
        e.state = std::move(restored->state);
    }

    void evict(SketchEntry &e) {
        if (config_.state_dir.empty()) throw error("evicting engine states requires a state directory");
        std::filesystem::create_directories(config_.state_dir);
        e.snapshot_path = snapshot_path(e);
        std::string tmp = e.snapshot_path + ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            out << persist_state(e);
            if (not out) throw error("failed writing '" + tmp + "'");
        }
        std::filesystem::rename(tmp, e.snapshot_path);
        e.state.reset();
    }

    /** Keeps at most `max_resident` states in memory, evicting the least recently used ones except `keep`. */
    void enforce_capacity(const SketchEntry *keep) {
        if (not config_.max_resident) return;
        std::vector<std::shared_ptr<SketchEntry>> resident;
        {
            std::lock_guard lock(registry_);
            for (const auto &e : entries_)
                if (e->resident() and e.get() != keep) resident.push_back(e);
        }
        std::size_t limit = config_.max_resident - (keep ? 1 : 0);
        if (resident.size() <= limit) return;
        std::sort(resident.begin(), resident.end(), [](auto &a, auto &b) { return a->last_used < b->last_used; });
        for (std::size_t i = 0; i + limit < resident.size(); ++i) {
            std::unique_lock lock(resident[i]->mutex, std::try_to_lock);
            if (lock.owns_lock() and resident[i]->state) evict(*resident[i]);
        }
    }

    void record(SketchEntry &e, VersionId v, Sketch s) {
        e.sketch = std::move(s);
        e.version = v;
        e.state->last_version = v;
        e.history.emplace_back(v, e.sketch);
    }

    /** Brings an entry to the current version.  Requires the entry's lock.  Returns (delta rows, recaptured). */
    std::pair<std::int64_t, bool> maintain_locked(SketchEntry &e) {
        VersionId to = store_.version();
        if (e.version == to) return {0, false};
        make_resident(e);
        EngineState &st = *e.state;
        VersionId from = e.version;

        if (config_.full_maintenance) {
            Sketch s = recapture(st, StoreSnapshot(store_, to));
            ++e.recaptures;
            ++e.maintenances;
            e.last_delta_rows = 0;
            record(e, to, std::move(s));
            return {0, true};
        }

        PushdownPlan pushed = st.config.pushdown ? plan_pushdown(st.plan) : PushdownPlan{};
        AnnotatedDeltaDatabase delta;
        std::int64_t rows = 0;
        for (const auto &r : base_relations(st.plan)) {
            if (delta.contains(r)) continue;
            auto d = store_.extract_delta(r, from, to, pushed.for_relation(r));
            rows += static_cast<std::int64_t>(d.rows.size());
            delta.emplace(r, annotate_delta(d, st.catalog));
        }
        e.last_delta_rows = rows;
        ++e.maintenances;
        try {
            SketchDelta dp = process_delta(st, delta, StoreSnapshot(store_, from));
            record(e, to, sketch_apply_delta(e.sketch, dp));
            return {rows, false};
        } catch (const recapture_required&) {
            Sketch s = recapture(st, StoreSnapshot(store_, to));
            ++e.recaptures;
            record(e, to, std::move(s));
            return {rows, true};
        }
    }

    BagRelation evaluate(const Plan &plan, const Sketch &sketch, const PartitionCatalog &catalog, VersionId v) const {
        StoreSnapshot snap(store_, v);
        try {
            return eval(instrument_query(plan, sketch, catalog), snap);
        } catch (const empty_sketch&) {
            return eval(without_merge(plan), EmptySource(snap));
        }
    }

    public:
    SketchManager(Store &store, ManagerConfig config = {}, PartitionCatalog catalog = {})
        : store_(store)
        , config_(std::move(config))
        , catalog_(std::move(catalog))
    { }

    const ManagerConfig & config() const { return config_; }
    const PartitionCatalog & catalog() const { return catalog_; }

    /** Partition used for queries captured implicitly by `answer_query`. */
    void declare_partition(RangePartition p) { catalog_.add(std::move(p)); }

    /** Full capture of `plan` at the current version; registers and returns the new entry. */
    std::shared_ptr<SketchEntry> capture(const Plan &plan, const PartitionCatalog &catalog) {
        auto e = std::make_shared<SketchEntry>();
        e->plan = without_merge(plan);
        e->query_template = template_of(e->plan);
        {
            std::lock_guard lock(e->mutex);
            VersionId v = store_.version();
            auto [st, sketch] = init_state(e->plan, StoreSnapshot(store_, v), catalog, config_.engine);
            e->catalog = st.catalog;
            e->state = std::move(st);
            record(*e, v, std::move(sketch));
        }
        {
            std::lock_guard lock(registry_);
            e->id = entries_.size();
            e->last_used = ++tick_;
            entries_.push_back(e);
        }
        enforce_capacity(e.get());
        return e;
    }

    std::shared_ptr<SketchEntry> capture(const Plan &plan) { return capture(plan, catalog_); }

    /** Rebuilds an entry's state at the current version; history is kept. */
    void recapture_entry(SketchEntry &e) {
        std::lock_guard lock(e.mutex);
        make_resident(e);
        VersionId v = store_.version();
        Sketch s = recapture(*e.state, StoreSnapshot(store_, v));
        ++e.recaptures;
        record(e, v, std::move(s));
    }

    /** Commits a batch.  Under the eager strategy, entries reading an updated relation are maintained once enough
     * delta rows have accumulated. */
    VersionId on_update(const DeltaDatabase &batch) {
        VersionId v = store_.commit(batch);
        if (not config_.strategy.is_eager()) return v;
        pending_rows_ += batch.size();
        for (const auto &[name, d] : batch.relations)
            if (not d.empty()) pending_relations_.insert(name);
        if (pending_rows_ < static_cast<std::int64_t>(config_.strategy.batch_size)) return v;
        for (const auto &e : entries()) {
            bool affected = false;
            for (const auto &r : base_relations(e->plan)) affected |= pending_relations_.contains(r);
            if (not affected) continue;
            {
                std::lock_guard lock(e->mutex);
                maintain_locked(*e);
            }
            enforce_capacity(nullptr);
        }
        pending_rows_ = 0;
        pending_relations_.clear();
        return v;
    }

    /** Brings an entry to the current version. */
    void maintain(SketchEntry &e) {
        {
            std::lock_guard lock(e.mutex);
            maintain_locked(e);
        }
        touch(e);
        enforce_capacity(&e);
    }

    /** Answers `plan` at the current version through a sketch, capturing one if no registered entry matches. */
    Answer answer(const Plan &plan) {
        Answer out;
        auto e = find(template_of(plan));
        if (not e) {
            e = capture(plan);
            out.captured = true;
        }
        VersionId v;
        Sketch sketch;
        PartitionCatalog catalog;
        {
            std::lock_guard lock(e->mutex);
            auto [rows, recaptured] = maintain_locked(*e);
            out.delta_rows = rows;
            out.recaptured = recaptured;
            v = e->version;
            sketch = e->sketch;
            catalog = e->catalog;
        }
        touch(*e);
        enforce_capacity(e.get());
        out.entry = e->id;
        out.sketch = sketch;
        out.result = evaluate(plan, sketch, catalog, v);
        return out;
    }

    BagRelation answer_query(const Plan &plan) { return answer(plan).result; }

    std::vector<std::shared_ptr<SketchEntry>> entries() const {
        std::lock_guard lock(registry_);
        return entries_;
    }

    std::shared_ptr<SketchEntry> entry(std::size_t id) const {
        std::lock_guard lock(registry_);
        if (id >= entries_.size()) throw error("no sketch entry " + std::to_string(id));
        return entries_[id];
    }

    std::size_t resident_count() const {
        std::lock_guard lock(registry_);
        std::size_t n = 0;
        for (const auto &e : entries_) n += e->resident();
        return n;
    }

    /** Writes an entry's snapshot to disk and drops its in-memory state. */
    void evict_entry(SketchEntry &e) {
        std::lock_guard lock(e.mutex);
        if (e.state) evict(e);
    }

    /** Registers an entry from a snapshot produced by `persist_state`.  Its version must exist in the store. */
    std::shared_ptr<SketchEntry> restore(const std::string &snapshot) {
        std::shared_ptr<SketchEntry> e = restore_entry(snapshot);
        if (e->version > store_.version()) throw corrupt_snapshot("entry is newer than the store");
        std::lock_guard lock(registry_);
        e->id = entries_.size();
        e->last_used = ++tick_;
        entries_.push_back(e);
        return e;
    }
};

}
