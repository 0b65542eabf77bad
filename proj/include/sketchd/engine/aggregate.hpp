#pragma once

#include <sketchd/annotated.hpp>
#include <sketchd/bind.hpp>
#include <sketchd/eval.hpp>

#include <cstdint>
#include <map>
#include <unordered_map>
#include <utility>
#include <vector>


namespace sketchd {

/** Ordered multiset of the values of one min/max aggregate within a group.  When bounded to `l` distinct values it
 * keeps the `l` most extreme ones; every dropped value lies strictly beyond the buffered ones, at or past `cutoff`. */
struct ExtremeBuffer
{
    std::map<Value, std::int64_t> values;
    bool truncated = false;
    Value cutoff;

    bool beyond_cutoff(const Value &v, bool max) const {
        return truncated and (max ? v <= cutoff : cutoff <= v);
    }

    void insert(const Value &v, std::int64_t n, bool max) {
        if (beyond_cutoff(v, max)) return;
        values[v] += n;
    }

    void remove(const Value &v, std::int64_t n, bool max) {
        auto it = values.find(v);
        if (it == values.end()) {
            if (beyond_cutoff(v, max)) return;
            throw inconsistent_delta("min/max state does not contain deleted value " + v.to_string());
        }
        if (it->second < n) throw inconsistent_delta("min/max state holds fewer copies of " + v.to_string());
        if ((it->second -= n) == 0) values.erase(it);
    }

    void trim(std::size_t capacity, bool max) {
        if (capacity == 0) return;
        while (values.size() > capacity) {
            auto victim = max ? values.begin() : std::prev(values.end());
            cutoff = victim->first;
            truncated = true;
            values.erase(victim);
        }
    }

    const Value & extreme(bool max) const { return max ? values.rbegin()->first : values.begin()->first; }

    friend bool operator==(const ExtremeBuffer&, const ExtremeBuffer&) = default;
};

struct AggGroup
{
    std::int64_t cnt = 0;
    std::vector<Value> sums;            ///< per aggregate; used by sum and avg
    std::vector<ExtremeBuffer> extremes; ///< per aggregate; used by min and max
    std::map<FragmentId, std::int64_t> frag_counts;

    Sketch sketch() const {
        Sketch s;
        for (const auto &[f, n] : frag_counts) if (n > 0) s.set(f);
        return s;
    }

    friend bool operator==(const AggGroup&, const AggGroup&) = default;
};

/** Group map of an aggregation: per group SUM/CNT, min/max buffers and per-fragment counts. */
struct AggState
{
    std::unordered_map<Tuple, AggGroup, TupleHash> groups;
    std::size_t minmax_capacity = 0; ///< 0: unbounded

    static bool is_max(const BoundAgg &a) { return a.fn == AggFn::max; }
    static bool is_extreme(const BoundAgg &a) { return a.fn == AggFn::min or a.fn == AggFn::max; }

    AggGroup fresh_group(const BoundNode &node) const {
        AggGroup g;
        g.sums.reserve(node.aggs.size());
        for (const auto &a : node.aggs)
            g.sums.push_back((a.fn == AggFn::sum or a.fn == AggFn::avg) ? zero_of(a.argument_kind) : Value());
        g.extremes.resize(node.aggs.size());
        return g;
    }

    /** Capture path: adds `n` copies of an input tuple. */
    void absorb(const BoundNode &node, const Tuple &key, const Tuple &t, const Sketch &p, std::int64_t n) {
        auto it = groups.find(key);
        if (it == groups.end()) it = groups.emplace(key, fresh_group(node)).first;
        AggGroup &g = it->second;
        g.cnt += n;
        for (std::size_t i = 0; i != node.aggs.size(); ++i) {
            const auto &a = node.aggs[i];
            if (a.fn == AggFn::sum or a.fn == AggFn::avg) {
                g.sums[i] = add(g.sums[i], scaled(t[*a.argument], n));
            } else if (is_extreme(a)) {
                g.extremes[i].insert(t[*a.argument], n, is_max(a));
                // trim lazily so capture stays linear
                if (minmax_capacity and g.extremes[i].values.size() > 2 * minmax_capacity)
                    g.extremes[i].trim(minmax_capacity, is_max(a));
            }
        }
        p.for_each([&](FragmentId f) { g.frag_counts[f] += n; });
    }

    void finish_capture(const BoundNode &node) {
        for (auto &[_, g] : groups)
            for (std::size_t i = 0; i != node.aggs.size(); ++i)
                if (is_extreme(node.aggs[i])) g.extremes[i].trim(minmax_capacity, is_max(node.aggs[i]));
    }

    static Tuple output(const BoundNode &node, const Tuple &key, const AggGroup &g) {
        Tuple out = key;
        out.reserve(key.size() + node.aggs.size());
        for (std::size_t i = 0; i != node.aggs.size(); ++i) {
            const auto &a = node.aggs[i];
            switch (a.fn) {
                case AggFn::sum: out.push_back(g.sums[i]); break;
                case AggFn::count: out.emplace_back(g.cnt); break;
                case AggFn::avg: out.push_back(average(g.sums[i], g.cnt)); break;
                case AggFn::min:
                case AggFn::max: out.push_back(g.extremes[i].extreme(is_max(a))); break;
            }
        }
        return out;
    }

    /** Exact identity of a group's output: the output tuple, with (SUM, CNT) standing in for each average. */
    static Tuple signature(const BoundNode &node, const Tuple &out, const AggGroup &g) {
        Tuple sig = out;
        for (std::size_t i = 0; i != node.aggs.size(); ++i)
            if (node.aggs[i].fn == AggFn::avg) {
                sig.push_back(g.sums[i]);
                sig.emplace_back(g.cnt);
            }
        return sig;
    }

    template<typename Sink>
    void emit_all(const BoundNode &node, Sink &&sink) const {
        for (const auto &[key, g] : groups) sink(output(node, key, g), g.sketch(), std::int64_t{1});
    }

    /** Maintenance path: applies one batch and returns the output delta (one delete/insert pair per changed group). */
    AnnotatedDelta apply(const BoundNode &node, const AnnotatedDelta &in) {
        struct Touch
        {
            Tuple key;
            bool existed = false;
            Tuple old_out, old_sig;
            Sketch old_sketch;
            std::vector<std::map<Value, std::int64_t>> net; ///< per aggregate, net change of min/max values
        };
        std::unordered_map<Tuple, std::size_t, TupleHash> index;
        std::vector<Touch> touches;

        Tuple key;
        for (const auto &a : in.rows) {
            key.clear();
            for (auto i : node.group_by) key.push_back(a.tuple[i]);
            auto [pos, fresh] = index.try_emplace(key, touches.size());
            if (fresh) {
                Touch t;
                t.key = key;
                t.net.resize(node.aggs.size());
                if (auto git = groups.find(key); git != groups.end()) {
                    t.existed = true;
                    t.old_out = output(node, key, git->second);
                    t.old_sig = signature(node, t.old_out, git->second);
                    t.old_sketch = git->second.sketch();
                }
                touches.push_back(std::move(t));
            }
            Touch &touch = touches[pos->second];
            auto git = groups.find(key);
            if (git == groups.end()) git = groups.emplace(key, fresh_group(node)).first;
            AggGroup &g = git->second;

            std::int64_t s = a.signed_multiplicity();
            g.cnt += s;
            for (std::size_t i = 0; i != node.aggs.size(); ++i) {
                const auto &agg = node.aggs[i];
                if (agg.fn == AggFn::sum or agg.fn == AggFn::avg)
                    g.sums[i] = add(g.sums[i], scaled(a.tuple[*agg.argument], s));
                else if (is_extreme(agg))
                    touch.net[i][a.tuple[*agg.argument]] += s;
            }
            a.sketch.for_each([&](FragmentId f) {
                auto &c = g.frag_counts[f];
                if ((c += s) == 0) g.frag_counts.erase(f);
            });
        }

        AnnotatedDelta out{node.schema, {}};
        for (auto &touch : touches) {
            auto git = groups.find(touch.key);
            AggGroup &g = git->second;
            if (g.cnt < 0) throw inconsistent_delta("group " + to_string(touch.key) + " lost more tuples than it had");
            for (const auto &[f, c] : g.frag_counts)
                if (c < 0) throw inconsistent_delta("negative fragment count in group " + to_string(touch.key));

            if (g.cnt == 0) {
                if (not g.frag_counts.empty())
                    throw inconsistent_delta("empty group " + to_string(touch.key) + " still references fragments");
                if (touch.existed) out.rows.push_back({touch.old_out, touch.old_sketch, 1, DeltaTag::remove});
                groups.erase(git);
                continue;
            }

            for (std::size_t i = 0; i != node.aggs.size(); ++i) {
                const auto &agg = node.aggs[i];
                if (not is_extreme(agg)) continue;
                bool max = is_max(agg);
                auto &buf = g.extremes[i];
                for (const auto &[v, n] : touch.net[i]) if (n < 0) buf.remove(v, -n, max);
                for (const auto &[v, n] : touch.net[i]) if (n > 0) buf.insert(v, n, max);
                buf.trim(minmax_capacity, max);
                if (buf.values.empty()) {
                    if (buf.truncated)
                        throw recapture_required("min/max buffer of group " + to_string(touch.key) + " ran empty");
                    throw inconsistent_delta("min/max state of live group " + to_string(touch.key) + " is empty");
                }
            }

            Tuple new_out = output(node, touch.key, g);
            Sketch new_sketch = g.sketch();
            if (not touch.existed) {
                out.rows.push_back({std::move(new_out), std::move(new_sketch), 1, DeltaTag::insert});
                continue;
            }
            if (signature(node, new_out, g) == touch.old_sig and new_sketch == touch.old_sketch) continue;
            out.rows.push_back({std::move(touch.old_out), std::move(touch.old_sketch), 1, DeltaTag::remove});
            out.rows.push_back({std::move(new_out), std::move(new_sketch), 1, DeltaTag::insert});
        }
        return out;
    }

    friend bool operator==(const AggState&, const AggState&) = default;
};

}
