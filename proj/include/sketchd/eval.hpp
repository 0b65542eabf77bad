#pragma once

#include <sketchd/bind.hpp>
#include <sketchd/plan.hpp>
#include <sketchd/relation.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <unordered_map>
#include <utility>
#include <vector>


namespace sketchd {

/** `v` counted `n` times, in the kind of `v`. */
inline Value scaled(const Value &v, std::int64_t n)
{
    if (v.is_int()) return mul(v, Value(n));
    return Value(v.as_float() * static_cast<double>(n));
}

inline Value zero_of(Kind k) { return k == Kind::f64 ? Value(0.0) : Value(std::int64_t{0}); }

inline Value average(const Value &sum, std::int64_t cnt) { return Value(sum.as_number() / static_cast<double>(cnt)); }

/** Order used by top-k: order key (with directions), then the full tuple. */
struct TopKLess
{
    const BoundNode *node;
    bool operator()(const Tuple &a, const Tuple &b) const {
        int c = compare_order(*node, a, b);
        return c < 0;
    }
};

namespace detail {

/** Plain running aggregate for one group. */
struct PlainGroup
{
    std::int64_t cnt = 0;
    std::vector<Value> acc;

    void add(const BoundNode &node, const Tuple &t, std::int64_t n) {
        if (acc.empty()) {
            acc.resize(node.aggs.size());
            for (std::size_t i = 0; i != node.aggs.size(); ++i) {
                const auto &a = node.aggs[i];
                if (a.fn == AggFn::sum or a.fn == AggFn::avg) acc[i] = zero_of(a.argument_kind);
                else if (a.argument) acc[i] = t[*a.argument];
            }
        }
        cnt += n;
        for (std::size_t i = 0; i != node.aggs.size(); ++i) {
            const auto &a = node.aggs[i];
            switch (a.fn) {
                case AggFn::sum:
                case AggFn::avg: acc[i] = sketchd::add(acc[i], scaled(t[*a.argument], n)); break;
                case AggFn::min: if (t[*a.argument] < acc[i]) acc[i] = t[*a.argument]; break;
                case AggFn::max: if (acc[i] < t[*a.argument]) acc[i] = t[*a.argument]; break;
                case AggFn::count: break;
            }
        }
    }

    Tuple result(const BoundNode &node, const Tuple &key) const {
        Tuple out = key;
        for (std::size_t i = 0; i != node.aggs.size(); ++i) {
            switch (node.aggs[i].fn) {
                case AggFn::count: out.emplace_back(cnt); break;
                case AggFn::avg: out.push_back(average(acc[i], cnt)); break;
                default: out.push_back(acc[i]);
            }
        }
        return out;
    }
};

inline Tuple concat(const Tuple &l, const Tuple &r)
{
    Tuple t;
    t.reserve(l.size() + r.size());
    t.insert(t.end(), l.begin(), l.end());
    t.insert(t.end(), r.begin(), r.end());
    return t;
}

}

/** Push-based evaluation: every result row of `node` over `src` is passed to `sink` (not consolidated). */
inline void stream(const BoundNode &node, const RowSource &src, const RowVisitor &sink)
{
    switch (node.kind) {
        case NodeKind::table:
            src.scan(node.relation, sink);
            return;

        case NodeKind::select:
            stream(node.child(), src, [&](const Tuple &t, std::int64_t n) { if (node.predicate(t)) sink(t, n); });
            return;

        case NodeKind::project: {
            Tuple out(node.projections.size());
            stream(node.child(), src, [&](const Tuple &t, std::int64_t n) {
                for (std::size_t i = 0; i != node.projections.size(); ++i) out[i] = node.projections[i](t);
                sink(out, n);
            });
            return;
        }

        case NodeKind::join: {
            // build on the right input, probe with the left
            std::unordered_map<Tuple, std::vector<std::pair<Tuple, std::int64_t>>, TupleHash> build;
            stream(node.child(1), src, [&](const Tuple &t, std::int64_t n) {
                build[node.join_key_right(t)].emplace_back(t, n);
            });
            if (build.empty()) return;
            stream(node.child(0), src, [&](const Tuple &l, std::int64_t n) {
                auto it = build.find(node.join_key_left(l));
                if (it == build.end()) return;
                for (const auto &[r, m] : it->second) {
                    Tuple t = detail::concat(l, r);
                    if (node.predicate(t)) sink(t, n * m);
                }
            });
            return;
        }

        case NodeKind::aggregate: {
            std::unordered_map<Tuple, detail::PlainGroup, TupleHash> groups;
            Tuple key;
            stream(node.child(), src, [&](const Tuple &t, std::int64_t n) {
                key.clear();
                for (auto i : node.group_by) key.push_back(t[i]);
                groups[key].add(node, t, n);
            });
            for (const auto &[g, acc] : groups) sink(acc.result(node, g), 1);
            return;
        }

        case NodeKind::topk: {
            std::map<Tuple, std::map<Tuple, std::int64_t>, TopKLess> ordered(TopKLess{&node});
            stream(node.child(), src, [&](const Tuple &t, std::int64_t n) { ordered[node.order_key(t)][t] += n; });
            std::int64_t remaining = static_cast<std::int64_t>(node.k);
            for (const auto &[_, inner] : ordered)
                for (const auto &[t, n] : inner) {
                    if (remaining == 0) return;
                    std::int64_t m = std::min(n, remaining);
                    sink(t, m);
                    remaining -= m;
                }
            return;
        }

        case NodeKind::merge:
            stream(node.child(), src, sink);
            return;
    }
}

/** Bag-semantics result of a plan without merge root. */
inline BagRelation eval(const Plan &plan, const RowSource &src)
{
    BoundNode root = bind(without_merge(plan), src);
    BagRelation out(root.schema);
    stream(root, src, [&](const Tuple &t, std::int64_t n) { out.add(t, n); });
    return out;
}

inline BagRelation eval(const Plan &plan, const Database &db) { return eval(plan, DatabaseSource(db)); }

}
