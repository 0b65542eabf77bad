#pragma once

#include <sketchd/bind.hpp>
#include <sketchd/bloom.hpp>
#include <sketchd/engine/aggregate.hpp>
#include <sketchd/engine/config.hpp>
#include <sketchd/engine/merge.hpp>
#include <sketchd/engine/topk.hpp>
#include <sketchd/partition.hpp>
#include <sketchd/plan.hpp>

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>


namespace sketchd {

/** Bloom filters over the join keys of each input, built on first use. */
struct JoinState
{
    std::optional<BloomFilter> left;  ///< keys of the left input; filters right deltas
    std::optional<BloomFilter> right; ///< keys of the right input; filters left deltas

    friend bool operator==(const JoinState&, const JoinState&) = default;
};

using NodeState = std::variant<std::monostate, JoinState, AggState, TopKState, MergeState>;

/** Everything needed to maintain the sketch of one query: the bound plan and per-operator state, indexed by node id. */
struct EngineState
{
    Plan plan;
    BoundNode root;
    PartitionCatalog catalog;
    EngineConfig config;
    std::vector<NodeState> nodes;
    std::uint64_t last_version = 0;
    EngineStats stats;

    const MergeState & merge() const { return std::get<MergeState>(nodes.at(0)); }
    const Sketch & sketch() const { return merge().current; }

    template<typename T> T & at(const BoundNode &n) { return std::get<T>(nodes.at(n.id)); }
    template<typename T> const T & at(const BoundNode &n) const { return std::get<T>(nodes.at(n.id)); }

    /** Operator state equality (statistics excluded). */
    bool same_state(const EngineState &o) const {
        return plan == o.plan and catalog == o.catalog and config == o.config and nodes == o.nodes and
               last_version == o.last_version;
    }
};

/** Fresh, empty state for every node of `root`. */
inline std::vector<NodeState> empty_states(const BoundNode &root, const PartitionCatalog &catalog,
                                           const EngineConfig &config)
{
    std::vector<NodeState> out(node_count(root));
    auto visit = [&](auto &self, const BoundNode &n) -> void {
        switch (n.kind) {
            case NodeKind::join: out[n.id] = JoinState{}; break;
            case NodeKind::aggregate: {
                AggState s;
                s.minmax_capacity = config.minmax_capacity();
                out[n.id] = std::move(s);
                break;
            }
            case NodeKind::topk: out[n.id] = TopKState(n, config.topk_capacity(n.k)); break;
            case NodeKind::merge: out[n.id] = MergeState(catalog.fragment_count()); break;
            default: break;
        }
        for (const auto &c : n.children) self(self, c);
    };
    visit(visit, root);
    return out;
}

}
