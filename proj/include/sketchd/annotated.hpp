#pragma once

#include <sketchd/partition.hpp>
#include <sketchd/relation.hpp>
#include <sketchd/sketch.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>


namespace sketchd {

/** A tuple with the sketch sufficient to derive it.  The tag is only meaningful inside deltas. */
struct AnnotatedTuple
{
    Tuple tuple;
    Sketch sketch;
    std::int64_t multiplicity = 1;
    DeltaTag tag = DeltaTag::insert;

    std::int64_t signed_multiplicity() const { return tag == DeltaTag::insert ? multiplicity : -multiplicity; }

    friend bool operator==(const AnnotatedTuple&, const AnnotatedTuple&) = default;
};

inline std::ostream & operator<<(std::ostream &out, const AnnotatedTuple &a)
{
    return out << "<" << tag_char(a.tag) << a.tuple << ", " << a.sketch << ">^" << a.multiplicity;
}

/** Bag of annotated tuples; entries need not be consolidated. */
struct AnnotatedRelation
{
    Schema schema;
    std::vector<AnnotatedTuple> rows;
};

/** Tagged bag of annotated tuples. */
using AnnotatedDelta = AnnotatedRelation;

using AnnotatedDatabase = std::map<std::string, AnnotatedRelation, std::less<>>;
using AnnotatedDeltaDatabase = std::map<std::string, AnnotatedDelta, std::less<>>;

/** Pairs every tuple with the singleton sketch of its fragment. */
inline AnnotatedRelation annotate(const BagRelation &rel, const PartitionCatalog &catalog)
{
    Annotator ann(catalog, rel.schema);
    AnnotatedRelation out{rel.schema, {}};
    out.rows.reserve(rel.rows.size());
    for (const auto &[t, n] : rel.rows) out.rows.push_back({t, ann(t), n, DeltaTag::insert});
    return out;
}

inline AnnotatedDelta annotate_delta(const DeltaRelation &delta, const PartitionCatalog &catalog)
{
    Annotator ann(catalog, delta.schema);
    AnnotatedDelta out{delta.schema, {}};
    out.rows.reserve(delta.rows.size());
    for (const auto &r : delta.rows) out.rows.push_back({r.tuple, ann(r.tuple), r.multiplicity, r.tag});
    return out;
}

inline AnnotatedDatabase annotate(const Database &db, const PartitionCatalog &catalog)
{
    AnnotatedDatabase out;
    for (const auto &[name, rel] : db.relations)
        if (catalog.has(name)) out.emplace(name, annotate(rel, catalog));
    return out;
}

inline AnnotatedDeltaDatabase annotate_delta(const DeltaDatabase &delta, const PartitionCatalog &catalog)
{
    AnnotatedDeltaDatabase out;
    for (const auto &[name, d] : delta.relations)
        if (catalog.has(name)) out.emplace(name, annotate_delta(d, catalog));
    return out;
}

/** Drops sketches, consolidating multiplicities.  Tags are ignored (use on relations). */
inline BagRelation tuples_in(const AnnotatedRelation &x)
{
    BagRelation out(x.schema);
    for (const auto &a : x.rows) out.add(a.tuple, a.multiplicity);
    return out;
}

/** Drops sketches from a delta, keeping tags and multiplicities as they are. */
inline DeltaRelation tuples_in_delta(const AnnotatedDelta &x)
{
    DeltaRelation out(x.schema);
    for (const auto &a : x.rows) out.rows.push_back({a.tag, a.tuple, a.multiplicity});
    return out;
}

/** Projects onto the sketch component: a signed bag of sketches. */
inline std::map<Sketch, std::int64_t> frags_in(const AnnotatedRelation &x)
{
    std::map<Sketch, std::int64_t> out;
    for (const auto &a : x.rows) out[a.sketch] += a.signed_multiplicity();
    std::erase_if(out, [](const auto &e) { return e.second == 0; });
    return out;
}

/** Union of all sketches with a positive net count. */
inline Sketch frag_set(const std::map<Sketch, std::int64_t> &bag)
{
    Sketch s;
    for (const auto &[p, n] : bag) if (n > 0) s |= p;
    return s;
}

/** Signed multiset view of an annotated relation or delta, keyed by (tuple, sketch). */
using AnnotatedBag = std::map<std::pair<Tuple, Sketch>, std::int64_t>;

inline AnnotatedBag consolidate(const AnnotatedRelation &x)
{
    AnnotatedBag out;
    for (const auto &a : x.rows) out[{a.tuple, a.sketch}] += a.signed_multiplicity();
    std::erase_if(out, [](const auto &e) { return e.second == 0; });
    return out;
}

/** `base` with `delta` applied (the annotated version of D ⊎ ΔD).  Throws if a count would become negative. */
inline AnnotatedBag apply_annotated(AnnotatedBag base, const AnnotatedDelta &delta)
{
    for (const auto &a : delta.rows) base[{a.tuple, a.sketch}] += a.signed_multiplicity();
    for (auto it = base.begin(); it != base.end();) {
        if (it->second < 0) throw ill_formed_delta("annotated delta removes " + to_string(it->first.first) + " " +
                                                   it->first.second.to_string() + " more often than present");
        it = it->second == 0 ? base.erase(it) : std::next(it);
    }
    return base;
}

inline BagRelation tuples_in(const AnnotatedBag &bag, Schema schema)
{
    BagRelation out(std::move(schema));
    for (const auto &[k, n] : bag) out.add(k.first, n);
    return out;
}

}
