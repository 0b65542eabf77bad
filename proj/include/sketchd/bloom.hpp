#pragma once

#include <sketchd/annotated.hpp>
#include <sketchd/value.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>


namespace sketchd {

/** Classic bloom filter over tuples (join keys), with double hashing. */
class BloomFilter
{
    static constexpr std::uint64_t seed1 = 0x243f6a8885a308d3ULL;
    static constexpr std::uint64_t seed2 = 0x13198a2e03707344ULL;

    std::vector<std::uint64_t> bits_;
    std::uint64_t m_ = 64;
    std::uint32_t h_ = 1;
    std::size_t capacity_ = 1;
    std::size_t inserted_ = 0;
    double fpr_ = 0.01;

    public:
    BloomFilter() : bits_(1, 0) { }

    /** Filter sized for `n` keys at false-positive rate `fpr`: m = ceil(-n ln(fpr) / ln(2)^2), h = ceil(m/n ln 2). */
    BloomFilter(std::size_t n, double fpr) : capacity_(std::max<std::size_t>(n, 1)), fpr_(fpr) {
        const double ln2 = std::log(2.0);
        double nn = static_cast<double>(capacity_);
        m_ = std::max<std::uint64_t>(64, static_cast<std::uint64_t>(std::ceil(-nn * std::log(fpr) / (ln2 * ln2))));
        h_ = std::max<std::uint32_t>(1, static_cast<std::uint32_t>(std::ceil(static_cast<double>(m_) / nn * ln2)));
        bits_.assign((m_ + 63) / 64, 0);
    }

    static BloomFilter restore(std::vector<std::uint64_t> bits, std::uint64_t m, std::uint32_t h, std::size_t capacity,
                               std::size_t inserted, double fpr) {
        BloomFilter f;
        f.bits_ = std::move(bits);
        f.m_ = m;
        f.h_ = h;
        f.capacity_ = capacity;
        f.inserted_ = inserted;
        f.fpr_ = fpr;
        return f;
    }

    std::uint64_t bit_count() const { return m_; }
    std::uint32_t hash_count() const { return h_; }
    std::size_t capacity() const { return capacity_; }
    std::size_t inserted() const { return inserted_; }
    double target_fpr() const { return fpr_; }
    const std::vector<std::uint64_t> & bits() const { return bits_; }

    /** Inserted far more keys than it was sized for; the false-positive rate no longer holds. */
    bool saturated() const { return inserted_ > 2 * capacity_; }

    void insert(const Tuple &key) {
        std::uint64_t a = hash_tuple(key, seed1), b = hash_tuple(key, seed2) | 1;
        for (std::uint32_t i = 0; i != h_; ++i) {
            std::uint64_t pos = (a + i * b) % m_;
            bits_[pos / 64] |= std::uint64_t{1} << (pos % 64);
        }
        ++inserted_;
    }

    bool may_contain(const Tuple &key) const {
        std::uint64_t a = hash_tuple(key, seed1), b = hash_tuple(key, seed2) | 1;
        for (std::uint32_t i = 0; i != h_; ++i) {
            std::uint64_t pos = (a + i * b) % m_;
            if (not ((bits_[pos / 64] >> (pos % 64)) & 1)) return false;
        }
        return true;
    }

    friend bool operator==(const BloomFilter&, const BloomFilter&) = default;
};

/** Drops delta tuples whose join key is definitely absent from the filter. */
inline AnnotatedDelta prefilter_join_delta(const AnnotatedDelta &delta, const BloomFilter &filter,
                                           const std::function<Tuple(const Tuple&)> &key)
{
    AnnotatedDelta out{delta.schema, {}};
    for (const auto &a : delta.rows)
        if (filter.may_contain(key(a.tuple))) out.rows.push_back(a);
    return out;
}

}
