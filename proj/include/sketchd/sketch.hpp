#pragma once

#include <sketchd/error.hpp>
#include <sketchd/value.hpp>

#include <algorithm>
#include <bit>
#include <boost/container/small_vector.hpp>
#include <cstdint>
#include <initializer_list>
#include <ostream>
#include <string>
#include <vector>


namespace sketchd {

using FragmentId = std::uint32_t;

/** Set of fragment ids, stored as a bitset over the global fragment space.  Trailing zero words are never stored, so
 * two sketches are equal iff their word vectors are. */
class Sketch
{
    using words_type = boost::container::small_vector<std::uint64_t, 2>;
    words_type words_;

    void trim() { while (not words_.empty() and words_.back() == 0) words_.pop_back(); }

    public:
    Sketch() = default;
    Sketch(std::initializer_list<FragmentId> ids) { for (auto f : ids) set(f); }

    static Sketch singleton(FragmentId f) { Sketch s; s.set(f); return s; }

    /** All fragments in [0, n). */
    static Sketch full(std::size_t n) {
        Sketch s;
        s.words_.assign((n + 63) / 64, ~std::uint64_t{0});
        if (n % 64) s.words_.back() = (std::uint64_t{1} << (n % 64)) - 1;
        s.trim();
        return s;
    }

    static Sketch from_words(std::vector<std::uint64_t> w) {
        Sketch s;
        s.words_.assign(w.begin(), w.end());
        s.trim();
        return s;
    }

    const words_type & words() const { return words_; }

    void set(FragmentId f) {
        std::size_t w = f / 64;
        if (words_.size() <= w) words_.resize(w + 1, 0);
        words_[w] |= std::uint64_t{1} << (f % 64);
    }

    void reset(FragmentId f) {
        std::size_t w = f / 64;
        if (w >= words_.size()) return;
        words_[w] &= ~(std::uint64_t{1} << (f % 64));
        trim();
    }

    bool test(FragmentId f) const {
        std::size_t w = f / 64;
        return w < words_.size() and (words_[w] >> (f % 64)) & 1;
    }

    bool empty() const { return words_.empty(); }

    std::size_t count() const {
        std::size_t n = 0;
        for (auto w : words_) n += std::popcount(w);
        return n;
    }

    /** One past the largest fragment id that could be set. */
    std::size_t width() const { return words_.size() * 64; }

    Sketch & operator|=(const Sketch &o) {
        if (words_.size() < o.words_.size()) words_.resize(o.words_.size(), 0);
        for (std::size_t i = 0; i != o.words_.size(); ++i) words_[i] |= o.words_[i];
        return *this;
    }

    Sketch & operator&=(const Sketch &o) {
        if (words_.size() > o.words_.size()) words_.resize(o.words_.size());
        for (std::size_t i = 0; i != words_.size(); ++i) words_[i] &= o.words_[i];
        trim();
        return *this;
    }

    /** Set difference. */
    Sketch & operator-=(const Sketch &o) {
        for (std::size_t i = 0; i != std::min(words_.size(), o.words_.size()); ++i) words_[i] &= ~o.words_[i];
        trim();
        return *this;
    }

    friend Sketch operator|(Sketch a, const Sketch &b) { return a |= b; }
    friend Sketch operator&(Sketch a, const Sketch &b) { return a &= b; }
    friend Sketch operator-(Sketch a, const Sketch &b) { return a -= b; }

    bool subset_of(const Sketch &o) const {
        if (words_.size() > o.words_.size()) return false;
        for (std::size_t i = 0; i != words_.size(); ++i)
            if (words_[i] & ~o.words_[i]) return false;
        return true;
    }

    bool intersects(const Sketch &o) const {
        for (std::size_t i = 0; i != std::min(words_.size(), o.words_.size()); ++i)
            if (words_[i] & o.words_[i]) return true;
        return false;
    }

    template<typename Fn>
    void for_each(Fn &&fn) const {
        for (std::size_t i = 0; i != words_.size(); ++i) {
            std::uint64_t w = words_[i];
            while (w) {
                fn(static_cast<FragmentId>(i * 64 + std::countr_zero(w)));
                w &= w - 1;
            }
        }
    }

    std::vector<FragmentId> ids() const {
        std::vector<FragmentId> out;
        for_each([&](FragmentId f) { out.push_back(f); });
        return out;
    }

    std::uint64_t hash(std::uint64_t seed = 0) const {
        std::uint64_t h = detail::mix64(seed ^ 0x9ddfea08eb382d69ULL);
        for (auto w : words_) h = detail::mix64(h ^ w);
        return h;
    }

    friend bool operator==(const Sketch &a, const Sketch &b) { return a.words_ == b.words_; }

    /** Arbitrary but deterministic total order: the sketches read as big unsigned integers. */
    friend bool operator<(const Sketch &a, const Sketch &b) {
        if (a.words_.size() != b.words_.size()) return a.words_.size() < b.words_.size();
        for (std::size_t i = a.words_.size(); i-- != 0;)
            if (a.words_[i] != b.words_[i]) return a.words_[i] < b.words_[i];
        return false;
    }

    std::string to_string() const {
        std::string s = "{";
        bool first = true;
        for_each([&](FragmentId f) {
            if (not first) s += ", ";
            first = false;
            s += std::to_string(f);
        });
        return s + "}";
    }

    friend std::ostream & operator<<(std::ostream &out, const Sketch &s) { return out << s.to_string(); }
};

struct SketchHash
{
    std::size_t operator()(const Sketch &s) const { return s.hash(); }
};

/** Tagged change to a sketch: fragments to add and fragments to drop.  The two sets are disjoint. */
struct SketchDelta
{
    Sketch inserts;
    Sketch deletes;

    bool empty() const { return inserts.empty() and deletes.empty(); }

    friend bool operator==(const SketchDelta&, const SketchDelta&) = default;
};

inline std::ostream & operator<<(std::ostream &out, const SketchDelta &d)
{
    return out << "+" << d.inserts << " -" << d.deletes;
}

/** (p - deletes) | inserts; throws `inconsistent_delta` unless deletes are present in `p` and inserts absent. */
inline Sketch sketch_apply_delta(const Sketch &p, const SketchDelta &dp)
{
    if (not dp.deletes.subset_of(p)) throw inconsistent_delta("sketch delta deletes fragments that are not present");
    if (dp.inserts.intersects(p)) throw inconsistent_delta("sketch delta inserts fragments that are already present");
    return (p - dp.deletes) | dp.inserts;
}

/** Net effect of applying `a` then `b`. */
inline SketchDelta compose(const SketchDelta &a, const SketchDelta &b)
{
    SketchDelta out;
    out.inserts = (a.inserts - b.deletes) | (b.inserts - a.deletes);
    out.deletes = (a.deletes - b.inserts) | (b.deletes - a.inserts);
    return out;
}

}
