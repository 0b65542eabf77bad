#pragma once

#include <sketchd/annotated.hpp>
#include <sketchd/bind.hpp>
#include <sketchd/bloom.hpp>
#include <sketchd/engine/capture.hpp>
#include <sketchd/engine/state.hpp>
#include <sketchd/eval.hpp>

#include <cstdint>
#include <unordered_map>
#include <utility>
#include <vector>


namespace sketchd {

/** Per-node output deltas of one `process_delta` call, indexed by node id. */
using DeltaTrace = std::vector<AnnotatedDelta>;

/** Full capture: binds `plan` (wrapped in a merge root if it has none), builds every operator state over `src` and
 * returns the state together with the accurate sketch.  Relations without a partition in `catalog` get a single
 * whole-domain range. */
inline std::pair<EngineState, Sketch> init_state(const Plan &plan, const RowSource &src, PartitionCatalog catalog,
                                                 const EngineConfig &config = {})
{
    EngineState st;
    st.plan = has_merge_root(plan) ? plan : merge(plan);
    catalog.cover(base_relations(st.plan), src);
    st.catalog = std::move(catalog);
    st.config = config;
    st.root = bind(st.plan, src);
    st.nodes = empty_states(st.root, st.catalog, st.config);
    Capture(src, st.catalog, st.config, &st.nodes).run(st.root, [](const Tuple&, const Sketch&, std::int64_t) { });
    Sketch s = st.sketch();
    return {std::move(st), std::move(s)};
}

/** Rebuilds the operator states of an existing state over `src`, keeping plan, catalog, config and statistics. */
inline Sketch recapture(EngineState &st, const RowSource &src)
{
    st.nodes = empty_states(st.root, st.catalog, st.config);
    Capture(src, st.catalog, st.config, &st.nodes).run(st.root, [](const Tuple&, const Sketch&, std::int64_t) { });
    return st.sketch();
}

namespace detail {

class Maintainer
{
    EngineState &st_;
    const AnnotatedDeltaDatabase &in_;
    const RowSource &pre_;
    DeltaTrace *trace_;

    const AnnotatedDelta & input(const std::string &relation, const Schema &schema) {
        static thread_local AnnotatedDelta empty;
        auto it = in_.find(relation);
        if (it == in_.end()) {
            empty.schema = schema;
            return empty;
        }
        return it->second;
    }

    BloomFilter build_bloom(const BoundNode &side, bool left_side, const BoundNode &join) {
        std::size_t n = 0;
        std::vector<Tuple> keys;
        Capture(pre_, st_.catalog, st_.config).run(side, [&](const Tuple &t, const Sketch&, std::int64_t) {
            keys.push_back(left_side ? join.join_key_left(t) : join.join_key_right(t));
        });
        n = keys.size();
        BloomFilter f(std::max<std::size_t>(n, 64), st_.config.bloom_fpr);
        for (const auto &k : keys) f.insert(k);
        ++st_.stats.bloom_builds;
        return f;
    }

    /** Joins delta `d` of one input with the other input at the pre-update version. */
    void offload(const BoundNode &join, const AnnotatedDelta &d, bool delta_left, AnnotatedDelta &out) {
        if (d.rows.empty()) return;
        const BoundNode &other = join.child(delta_left ? 1 : 0);
        auto delta_key = [&](const Tuple &t) { return delta_left ? join.join_key_left(t) : join.join_key_right(t); };

        st_.stats.join_delta_in += d.rows.size();
        const AnnotatedDelta *probe = &d;
        AnnotatedDelta filtered;
        if (st_.config.bloom and not join.equi_keys.empty()) {
            auto &js = st_.at<JoinState>(join);
            auto &bloom = delta_left ? js.right : js.left;
            if (not bloom or bloom->saturated()) bloom = build_bloom(other, not delta_left, join);
            filtered = prefilter_join_delta(d, *bloom, delta_key);
            probe = &filtered;
        }
        st_.stats.join_delta_forwarded += probe->rows.size();
        if (probe->rows.empty()) {
            ++st_.stats.skipped_round_trips;
            return;
        }
        ++st_.stats.round_trips;

        std::unordered_map<Tuple, std::vector<std::size_t>, TupleHash> hashed;
        for (std::size_t i = 0; i != probe->rows.size(); ++i) hashed[delta_key(probe->rows[i].tuple)].push_back(i);

        Capture(pre_, st_.catalog, st_.config).run(other, [&](const Tuple &t, const Sketch &p, std::int64_t n) {
            auto it = hashed.find(delta_left ? join.join_key_right(t) : join.join_key_left(t));
            if (it == hashed.end()) return;
            for (auto i : it->second) {
                const auto &a = probe->rows[i];
                Tuple joined = delta_left ? concat(a.tuple, t) : concat(t, a.tuple);
                if (not join.predicate(joined)) continue;
                out.rows.push_back({std::move(joined), a.sketch | p, a.multiplicity * n, a.tag});
            }
        });
    }

    AnnotatedDelta join_deltas(const BoundNode &join, const AnnotatedDelta &dl, const AnnotatedDelta &dr) {
        AnnotatedDelta out{join.schema, {}};
        offload(join, dl, true, out);
        offload(join, dr, false, out);
        if (not dl.rows.empty() and not dr.rows.empty()) {
            std::unordered_map<Tuple, std::vector<std::size_t>, TupleHash> hashed;
            for (std::size_t i = 0; i != dr.rows.size(); ++i) hashed[join.join_key_right(dr.rows[i].tuple)].push_back(i);
            for (const auto &l : dl.rows) {
                auto it = hashed.find(join.join_key_left(l.tuple));
                if (it == hashed.end()) continue;
                for (auto i : it->second) {
                    const auto &r = dr.rows[i];
                    Tuple joined = concat(l.tuple, r.tuple);
                    if (not join.predicate(joined)) continue;
                    DeltaTag tag = l.tag == r.tag ? DeltaTag::insert : DeltaTag::remove;
                    out.rows.push_back({std::move(joined), l.sketch | r.sketch, l.multiplicity * r.multiplicity, tag});
                }
            }
        }
        // keep the filters in step with the inputs; deletions are left in (false positives only cost work)
        if (st_.config.bloom and not join.equi_keys.empty()) {
            auto &js = st_.at<JoinState>(join);
            if (js.left)
                for (const auto &a : dl.rows) if (a.tag == DeltaTag::insert) js.left->insert(join.join_key_left(a.tuple));
            if (js.right)
                for (const auto &a : dr.rows) if (a.tag == DeltaTag::insert) js.right->insert(join.join_key_right(a.tuple));
        }
        return out;
    }

    public:
    Maintainer(EngineState &st, const AnnotatedDeltaDatabase &in, const RowSource &pre, DeltaTrace *trace)
        : st_(st), in_(in), pre_(pre), trace_(trace)
    { }

    AnnotatedDelta run(const BoundNode &node) {
        AnnotatedDelta out = step(node);
        if (trace_) (*trace_)[node.id] = out;
        return out;
    }

    AnnotatedDelta step(const BoundNode &node) {
        switch (node.kind) {
            case NodeKind::table: {
                AnnotatedDelta d = input(node.relation, node.schema);
                d.schema = node.schema;
                return d;
            }

            case NodeKind::select: {
                AnnotatedDelta d = run(node.child());
                std::erase_if(d.rows, [&](const AnnotatedTuple &a) { return not node.predicate(a.tuple); });
                d.schema = node.schema;
                return d;
            }

            case NodeKind::project: {
                AnnotatedDelta d = run(node.child());
                for (auto &a : d.rows) {
                    Tuple t;
                    t.reserve(node.projections.size());
                    for (const auto &e : node.projections) t.push_back(e(a.tuple));
                    a.tuple = std::move(t);
                }
                d.schema = node.schema;
                return d;
            }

            case NodeKind::join: {
                AnnotatedDelta dl = run(node.child(0));
                AnnotatedDelta dr = run(node.child(1));
                return join_deltas(node, dl, dr);
            }

            case NodeKind::aggregate: {
                AnnotatedDelta d = run(node.child());
                if (d.rows.empty()) return {node.schema, {}};
                return st_.at<AggState>(node).apply(node, d);
            }

            case NodeKind::topk: {
                AnnotatedDelta d = run(node.child());
                if (d.rows.empty()) return {node.schema, {}};
                return st_.at<TopKState>(node).apply(node, d);
            }

            case NodeKind::merge:
                return run(node.child());
        }
        return {};
    }
};

}

/** Incremental maintenance of one batch.  `delta` is annotated against the state's catalog; `pre` is the database
 * the state corresponds to (before the batch).  Returns the sketch delta and updates the state in place.
 *
 * On `recapture_required` (and on any other error) the state is left partially updated and must be rebuilt with
 * `recapture` over the updated database. */
inline SketchDelta process_delta(EngineState &st, const AnnotatedDeltaDatabase &delta, const RowSource &pre,
                                 DeltaTrace *trace = nullptr)
{
    if (trace) trace->assign(st.nodes.size(), {});
    bool any = false;
    for (const auto &[_, d] : delta) any |= not d.rows.empty();
    if (not any) return {};
    detail::Maintainer m(st, delta, pre, trace);
    AnnotatedDelta root = m.run(st.root.child());
    if (trace) (*trace)[st.root.id] = root;
    return std::get<MergeState>(st.nodes[st.root.id]).step(root);
}

}
