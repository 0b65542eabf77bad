#pragma once

// Checks shared by the unit tests and the acceptance binary.  Each returns an empty string on success and a
// description of the first violation otherwise.

#include "oracle.hpp"
#include "random_corpus.hpp"

#include <sketchd/bind.hpp>
#include <sketchd/codec.hpp>
#include <sketchd/engine/engine.hpp>
#include <sketchd/engine/snapshot.hpp>
#include <sketchd/eval.hpp>
#include <sketchd/pushdown.hpp>

#include <sstream>
#include <string>


namespace props {

using namespace sketchd;

inline std::string describe(const corpus::Case &c)
{
    std::ostringstream out;
    out << "seed " << c.seed << ", plan " << codec::to_json(c.plan).dump() << ", |delta| " << c.delta.size();
    return out.str();
}

/** Delta rows that survive the selections pushed down to their relation. */
inline DeltaDatabase pushed_down(const DeltaDatabase &delta, const Plan &plan)
{
    PushdownPlan p = plan_pushdown(plan);
    DeltaDatabase out;
    for (const auto &[name, d] : delta.relations) {
        DeltaRelation kept(d.schema);
        auto pred = p.for_relation(name);
        std::optional<CompiledPredicate> f;
        if (pred) f.emplace(*pred, d.schema);
        for (const auto &r : d.rows)
            if (not f or (*f)(r.tuple)) kept.rows.push_back(r);
        out.relations.emplace(name, std::move(kept));
    }
    return out;
}

struct Maintained
{
    EngineState state;
    Sketch initial;
    Sketch sketch;
    bool recaptured = false;
    DeltaTrace trace;
};

/** Captures over the case's database and maintains through its delta in one batch. */
inline Maintained maintain(const corpus::Case &c, const EngineConfig &config)
{
    Database post = apply_delta(c.db, c.delta);
    auto [st, s0] = init_state(c.plan, DatabaseSource(c.db), c.catalog, config);
    Maintained m{std::move(st), s0, s0, false, {}};
    DeltaDatabase d = config.pushdown ? pushed_down(c.delta, m.state.plan) : c.delta;
    try {
        SketchDelta dp = process_delta(m.state, annotate_delta(d, m.state.catalog), DatabaseSource(c.db), &m.trace);
        m.sketch = sketch_apply_delta(s0, dp);
    } catch (const recapture_required&) {
        m.sketch = recapture(m.state, DatabaseSource(post));
        m.recaptured = true;
    }
    return m;
}

/** Incremental sketch equals a fresh capture on the updated database (exact state), or is a safe superset of it. */
inline std::string check_incremental(const corpus::Case &c, bool optimized)
{
    EngineConfig config = optimized ? EngineConfig{} : EngineConfig::exact();
    Database post = apply_delta(c.db, c.delta);
    Maintained m = maintain(c, config);
    auto [fresh_state, fresh] = init_state(c.plan, DatabaseSource(post), c.catalog, config);
    if (m.sketch != m.state.sketch()) return "returned sketch differs from the state's sketch: " + describe(c);
    if (not optimized) {
        if (m.recaptured) return "exact state asked for a recapture: " + describe(c);
        if (m.sketch != fresh)
            return "incremental " + m.sketch.to_string() + " != recapture " + fresh.to_string() + ": " + describe(c);
        if (not m.state.same_state(fresh_state)) return "operator state differs from recapture: " + describe(c);
        Sketch accurate = oracle::sketch(c.plan, annotate(post, c.catalog));
        if (fresh != accurate)
            return "capture " + fresh.to_string() + " != oracle " + accurate.to_string() + ": " + describe(c);
    } else {
        if (not fresh.subset_of(m.sketch))
            return "optimized " + m.sketch.to_string() + " misses fragments of " + fresh.to_string() + ": " + describe(c);
        if (eval(c.plan, sketch_instance(m.sketch, post, c.catalog)) != eval(c.plan, post))
            return "optimized sketch is not safe: " + describe(c);
    }
    return {};
}

/** Old result plus the root output delta gives the new result, which the maintained sketch reproduces. */
inline std::string check_tuples(const corpus::Case &c)
{
    Database post = apply_delta(c.db, c.delta);
    Maintained m = maintain(c, EngineConfig::exact());
    std::map<Tuple, std::int64_t> combined;
    auto before = oracle::run(c.plan, annotate(c.db, c.catalog));
    for (const auto &[k, n] : before.rows) combined[k.first] += n;
    if (not m.trace.empty())
        for (const auto &a : m.trace[0].rows) combined[a.tuple] += a.signed_multiplicity();
    for (const auto &[t, n] : combined)
        if (n < 0) return "root delta deletes more copies than exist: " + describe(c);
    std::erase_if(combined, [](const auto &e) { return e.second == 0; });
    BagRelation expected = eval(c.plan, post);
    if (combined != expected.rows) return "old result plus root delta differs from the new result: " + describe(c);
    if (expected.rows != oracle::eval(c.plan, post, c.catalog).rows) return "evaluator disagrees with oracle: " + describe(c);
    if (eval(c.plan, sketch_instance(m.sketch, post, c.catalog)) != expected)
        return "maintained sketch does not reproduce the result: " + describe(c);
    return {};
}

/** Singleton batches end in the same sketch and operator state as one batch. */
inline std::string check_batching(const corpus::Case &c)
{
    Maintained whole = maintain(c, EngineConfig::exact());
    auto [st, s] = init_state(c.plan, DatabaseSource(c.db), c.catalog, EngineConfig::exact());
    Database cur = c.db;
    for (const auto &b : corpus::singletons(c.delta)) {
        SketchDelta dp = process_delta(st, annotate_delta(b, st.catalog), DatabaseSource(cur));
        s = sketch_apply_delta(s, dp);
        cur = apply_delta(std::move(cur), b);
    }
    if (s != whole.sketch) return "singleton batches give " + s.to_string() + ", one batch " + whole.sketch.to_string() + ": " + describe(c);
    if (not st.same_state(whole.state)) return "singleton batches leave a different state: " + describe(c);
    return {};
}

/** A persisted and restored state serializes identically and maintains exactly like the original. */
inline std::string check_persistence(const corpus::Case &c, const EngineConfig &config)
{
    Database post = apply_delta(c.db, c.delta);
    auto [st, s0] = init_state(c.plan, DatabaseSource(c.db), c.catalog, config);
    std::string text = persist_state(st);
    EngineState back = restore_state(text);
    if (persist_state(back) != text) return "restored state serializes differently: " + describe(c);
    if (not back.same_state(st)) return "restored state differs: " + describe(c);
    DeltaDatabase d = config.pushdown ? pushed_down(c.delta, st.plan) : c.delta;
    auto step = [&](EngineState &x) {
        try {
            return sketch_apply_delta(s0, process_delta(x, annotate_delta(d, x.catalog), DatabaseSource(c.db)));
        } catch (const recapture_required&) {
            return recapture(x, DatabaseSource(post));
        }
    };
    Sketch a = step(st), b = step(back);
    if (a != b) return "restored state maintains to " + b.to_string() + " instead of " + a.to_string() + ": " + describe(c);
    if (persist_state(st) != persist_state(back)) return "states diverge after maintenance: " + describe(c);
    return {};
}

}
