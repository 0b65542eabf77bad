#pragma once

#include <cstddef>
#include <cstdint>


namespace sketchd {

/** Knobs of the incremental engine.  The defaults enable every optimization; `exact()` is the reference
 * configuration with unbounded operator state. */
struct EngineConfig
{
    bool bloom = true;
    double bloom_fpr = 0.01;
    bool pushdown = true;
    bool bounded = true;           ///< bound min/max and top-k state
    std::size_t topk_buffer = 0;   ///< l for top-k; 0 means 5k
    std::size_t minmax_buffer = 16;

    static EngineConfig exact() {
        EngineConfig c;
        c.bloom = false;
        c.pushdown = false;
        c.bounded = false;
        return c;
    }

    /** Top-k capacity for a given k, or 0 when unbounded. */
    std::size_t topk_capacity(std::size_t k) const {
        if (not bounded) return 0;
        return topk_buffer ? topk_buffer : 5 * k;
    }

    std::size_t minmax_capacity() const { return bounded ? minmax_buffer : 0; }

    friend bool operator==(const EngineConfig&, const EngineConfig&) = default;
};

/** Counters of work done by the engine; cumulative over the lifetime of a state. */
struct EngineStats
{
    std::uint64_t join_delta_in = 0;        ///< delta tuples arriving at a join that needs the other side
    std::uint64_t join_delta_forwarded = 0; ///< of those, tuples that passed the bloom filter
    std::uint64_t round_trips = 0;          ///< scans of a join input at the pre-update version
    std::uint64_t skipped_round_trips = 0;  ///< scans avoided because no delta tuple passed the filter
    std::uint64_t bloom_builds = 0;

    friend bool operator==(const EngineStats&, const EngineStats&) = default;
};

}
