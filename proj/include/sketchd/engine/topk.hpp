#pragma once

#include <sketchd/annotated.hpp>
#include <sketchd/bind.hpp>

#include <cstdint>
#include <map>
#include <utility>
#include <vector>


namespace sketchd {

/** Order over top-k order keys with per-attribute direction. */
struct OrderLess
{
    std::vector<bool> descending;

    bool operator()(const Tuple &a, const Tuple &b) const {
        for (std::size_t i = 0; i != a.size(); ++i) {
            if (a[i] == b[i]) continue;
            bool less = a[i] < b[i];
            return descending[i] ? not less : less;
        }
        return false;
    }

    friend bool operator==(const OrderLess&, const OrderLess&) = default;
};

/** Nested map order key -> (tuple, sketch) -> multiplicity.  When bounded to `capacity` it keeps a prefix of the
 * order holding at least `capacity` tuples; everything dropped sorts at or after `cutoff`. */
struct TopKState
{
    using Entry = std::pair<Tuple, Sketch>;
    using Inner = std::map<Entry, std::int64_t>;

    std::map<Tuple, Inner, OrderLess> entries;
    std::size_t k = 1;
    std::size_t capacity = 0; ///< 0: unbounded
    std::int64_t total = 0;   ///< buffered tuples, counting multiplicities
    bool truncated = false;
    Tuple cutoff_order;
    Entry cutoff_entry;

    TopKState() = default;
    TopKState(const BoundNode &node, std::size_t capacity) : entries(order_less(node)), k(node.k), capacity(capacity) {
        if (capacity and capacity < k)
            throw invalid_plan("top-k buffer " + std::to_string(capacity) + " is smaller than k = " + std::to_string(k));
    }

    static OrderLess order_less(const BoundNode &node) {
        OrderLess o;
        for (const auto &ord : node.order) o.descending.push_back(ord.descending);
        return o;
    }

    bool beyond_cutoff(const Tuple &o, const Entry &e) const {
        if (not truncated) return false;
        const auto &less = entries.key_comp();
        if (less(o, cutoff_order)) return false;
        if (less(cutoff_order, o)) return true;
        return not (e < cutoff_entry);
    }

    void insert(const Tuple &o, const Entry &e, std::int64_t n) {
        if (beyond_cutoff(o, e)) return;
        entries[o][e] += n;
        total += n;
    }

    void remove(const Tuple &o, const Entry &e, std::int64_t n) {
        auto oit = entries.find(o);
        if (oit != entries.end()) {
            if (auto it = oit->second.find(e); it != oit->second.end()) {
                if (it->second < n)
                    throw inconsistent_delta("top-k state holds fewer copies of " + to_string(e.first));
                total -= n;
                if ((it->second -= n) == 0) oit->second.erase(it);
                if (oit->second.empty()) entries.erase(oit);
                return;
            }
        }
        if (beyond_cutoff(o, e)) return;
        throw inconsistent_delta("top-k state does not contain deleted tuple " + to_string(e.first));
    }

    /** Drops whole entries from the end while at least `capacity` tuples remain. */
    void trim() {
        if (capacity == 0) return;
        const auto cap = static_cast<std::int64_t>(capacity);
        while (not entries.empty()) {
            auto oit = std::prev(entries.end());
            auto it = std::prev(oit->second.end());
            if (total - it->second < cap) break;
            total -= it->second;
            cutoff_order = oit->first;
            cutoff_entry = it->first;
            truncated = true;
            oit->second.erase(it);
            if (oit->second.empty()) entries.erase(oit);
        }
    }

    /** The first k positions, splitting the last multiplicity at the boundary. */
    std::vector<AnnotatedTuple> top() const {
        std::vector<AnnotatedTuple> out;
        auto remaining = static_cast<std::int64_t>(k);
        for (const auto &[_, inner] : entries)
            for (const auto &[e, n] : inner) {
                if (remaining == 0) return out;
                std::int64_t m = std::min(n, remaining);
                out.push_back({e.first, e.second, m, DeltaTag::insert});
                remaining -= m;
            }
        return out;
    }

    /** Capture path. */
    void absorb(const BoundNode &node, const Tuple &t, const Sketch &p, std::int64_t n) {
        insert(node.order_key(t), Entry{t, p}, n);
        if (capacity and total > 2 * static_cast<std::int64_t>(capacity) + 1024) trim();
    }

    void finish_capture() { trim(); }

    AnnotatedDelta apply(const BoundNode &node, const AnnotatedDelta &in) {
        std::map<Entry, std::int64_t> net;
        for (const auto &a : in.rows) net[{a.tuple, a.sketch}] += a.signed_multiplicity();

        auto old_top = top();
        for (const auto &[e, n] : net) if (n < 0) remove(node.order_key(e.first), e, -n);
        for (const auto &[e, n] : net) if (n > 0) insert(node.order_key(e.first), e, n);
        trim();
        if (truncated and total < static_cast<std::int64_t>(k))
            throw recapture_required("top-k buffer holds " + std::to_string(total) + " tuples, fewer than k = " +
                                     std::to_string(k));
        auto new_top = top();

        std::map<Entry, std::int64_t> diff;
        for (const auto &a : old_top) diff[{a.tuple, a.sketch}] -= a.multiplicity;
        for (const auto &a : new_top) diff[{a.tuple, a.sketch}] += a.multiplicity;
        AnnotatedDelta out{node.schema, {}};
        for (const auto &[e, n] : diff)
            if (n < 0) out.rows.push_back({e.first, e.second, -n, DeltaTag::remove});
        for (const auto &[e, n] : diff)
            if (n > 0) out.rows.push_back({e.first, e.second, n, DeltaTag::insert});
        return out;
    }

    friend bool operator==(const TopKState&, const TopKState&) = default;
};

}
