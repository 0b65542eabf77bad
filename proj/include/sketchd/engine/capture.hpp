#pragma once

#include <sketchd/annotated.hpp>
#include <sketchd/bind.hpp>
#include <sketchd/engine/state.hpp>
#include <sketchd/eval.hpp>

#include <cstdint>
#include <functional>
#include <unordered_map>
#include <vector>


namespace sketchd {

using AnnotatedSink = std::function<void(const Tuple&, const Sketch&, std::int64_t)>;

/** Streaming annotated evaluation.  With `states` set, the operator states built along the way are stored there
 * (this is how state gets captured); otherwise they are scratch and discarded. */
class Capture
{
    const RowSource &src_;
    const PartitionCatalog &catalog_;
    const EngineConfig &config_;
    std::vector<NodeState> *states_;

    public:
    Capture(const RowSource &src, const PartitionCatalog &catalog, const EngineConfig &config,
            std::vector<NodeState> *states = nullptr)
        : src_(src), catalog_(catalog), config_(config), states_(states)
    { }

    void run(const BoundNode &node, const AnnotatedSink &sink) {
        switch (node.kind) {
            case NodeKind::table: {
                Annotator ann(catalog_, node.schema);
                Sketch p;
                src_.scan(node.relation, [&](const Tuple &t, std::int64_t n) {
                    p = ann(t);
                    sink(t, p, n);
                });
                return;
            }

            case NodeKind::select:
                run(node.child(), [&](const Tuple &t, const Sketch &p, std::int64_t n) {
                    if (node.predicate(t)) sink(t, p, n);
                });
                return;

            case NodeKind::project: {
                Tuple out(node.projections.size());
                run(node.child(), [&](const Tuple &t, const Sketch &p, std::int64_t n) {
                    for (std::size_t i = 0; i != node.projections.size(); ++i) out[i] = node.projections[i](t);
                    sink(out, p, n);
                });
                return;
            }

            case NodeKind::join: {
                struct Row { Tuple t; Sketch p; std::int64_t n; };
                std::unordered_map<Tuple, std::vector<Row>, TupleHash> build;
                run(node.child(1), [&](const Tuple &t, const Sketch &p, std::int64_t n) {
                    build[node.join_key_right(t)].push_back({t, p, n});
                });
                if (build.empty()) {
                    // the left input still has to be visited so its operator states get recorded
                    if (states_) run(node.child(0), [](const Tuple&, const Sketch&, std::int64_t) { });
                    return;
                }
                run(node.child(0), [&](const Tuple &l, const Sketch &p, std::int64_t n) {
                    auto it = build.find(node.join_key_left(l));
                    if (it == build.end()) return;
                    for (const auto &r : it->second) {
                        Tuple t = detail::concat(l, r.t);
                        if (node.predicate(t)) sink(t, p | r.p, n * r.n);
                    }
                });
                return;
            }

            case NodeKind::aggregate: {
                AggState local;
                AggState &st = states_ ? std::get<AggState>((*states_)[node.id]) : local;
                st.groups.clear();
                st.minmax_capacity = config_.minmax_capacity();
                Tuple key;
                run(node.child(), [&](const Tuple &t, const Sketch &p, std::int64_t n) {
                    key.clear();
                    for (auto i : node.group_by) key.push_back(t[i]);
                    st.absorb(node, key, t, p, n);
                });
                st.finish_capture(node);
                st.emit_all(node, sink);
                return;
            }

            case NodeKind::topk: {
                TopKState local(node, config_.topk_capacity(node.k));
                TopKState &st = states_ ? std::get<TopKState>((*states_)[node.id]) : local;
                if (states_) st = TopKState(node, config_.topk_capacity(node.k));
                run(node.child(), [&](const Tuple &t, const Sketch &p, std::int64_t n) { st.absorb(node, t, p, n); });
                st.finish_capture();
                for (const auto &a : st.top()) sink(a.tuple, a.sketch, a.multiplicity);
                return;
            }

            case NodeKind::merge: {
                MergeState local(catalog_.fragment_count());
                MergeState &st = states_ ? std::get<MergeState>((*states_)[node.id]) : local;
                st = MergeState(catalog_.fragment_count());
                run(node.child(), [&](const Tuple &t, const Sketch &p, std::int64_t n) {
                    st.add(p, n);
                    sink(t, p, n);
                });
                st.refresh();
                return;
            }
        }
    }
};

}
