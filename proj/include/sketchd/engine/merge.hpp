#pragma once

#include <sketchd/annotated.hpp>
#include <sketchd/sketch.hpp>

#include <cstdint>
#include <vector>


namespace sketchd {

/** Root state: per fragment, the number of result tuples (counting multiplicities) whose sketch contains it. */
struct MergeState
{
    std::vector<std::int64_t> counts;
    Sketch current;

    MergeState() = default;
    explicit MergeState(std::size_t fragments) : counts(fragments, 0) { }

    void add(const Sketch &p, std::int64_t n) {
        p.for_each([&](FragmentId f) {
            if (f >= counts.size()) throw inconsistent_delta("fragment " + std::to_string(f) + " is not registered");
            counts[f] += n;
        });
    }

    /** Recomputes `current` from the counts. */
    void refresh() {
        current = Sketch();
        for (std::size_t f = 0; f != counts.size(); ++f)
            if (counts[f] > 0) current.set(static_cast<FragmentId>(f));
    }

    /** Applies an annotated delta and reports the fragments whose count crossed zero. */
    SketchDelta step(const AnnotatedDelta &delta) {
        Sketch touched;
        for (const auto &a : delta.rows) {
            add(a.sketch, a.signed_multiplicity());
            touched |= a.sketch;
        }
        SketchDelta out;
        touched.for_each([&](FragmentId f) {
            if (counts[f] < 0)
                throw inconsistent_delta("merge count of fragment " + std::to_string(f) + " became negative");
            bool was = current.test(f), is = counts[f] > 0;
            if (not was and is) out.inserts.set(f);
            if (was and not is) out.deletes.set(f);
        });
        current -= out.deletes;
        current |= out.inserts;
        return out;
    }

    friend bool operator==(const MergeState&, const MergeState&) = default;
};

}
