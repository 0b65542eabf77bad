#pragma once

#include <sketchd/annotated.hpp>
#include <sketchd/bind.hpp>
#include <sketchd/eval.hpp>

#include <algorithm>
#include <cstdint>
#include <map>
#include <vector>


namespace sketchd {

/** Schemas of an annotated database, for binding plans against it. */
class AnnotatedSchemas : public RowSource
{
    const AnnotatedDatabase &db_;

    public:
    explicit AnnotatedSchemas(const AnnotatedDatabase &db) : db_(db) { }

    const Schema & schema(std::string_view relation) const override {
        auto it = db_.find(relation);
        if (it == db_.end()) throw unknown_relation("unknown relation '" + std::string(relation) + "'");
        return it->second.schema;
    }

    void scan(std::string_view relation, const RowVisitor &visit) const override {
        for (const auto &a : db_.at(std::string(relation)).rows) visit(a.tuple, a.multiplicity);
    }
};

namespace detail {

/** Materializing, operator-at-a-time evaluation over annotated relations.  Kept deliberately simple: it is the
 * reference the incremental engine is tested against. */
inline std::vector<AnnotatedTuple> eval_annotated_node(const BoundNode &node, const AnnotatedDatabase &db)
{
    std::vector<AnnotatedTuple> out;
    switch (node.kind) {
        case NodeKind::table:
            return db.at(node.relation).rows;

        case NodeKind::select:
            for (auto &a : eval_annotated_node(node.child(), db))
                if (node.predicate(a.tuple)) out.push_back(std::move(a));
            return out;

        case NodeKind::project:
            for (auto &a : eval_annotated_node(node.child(), db)) {
                Tuple t;
                for (const auto &e : node.projections) t.push_back(e(a.tuple));
                out.push_back({std::move(t), std::move(a.sketch), a.multiplicity, DeltaTag::insert});
            }
            return out;

        case NodeKind::join: {
            auto left = eval_annotated_node(node.child(0), db);
            auto right = eval_annotated_node(node.child(1), db);
            for (const auto &l : left)
                for (const auto &r : right) {
                    if (node.join_key_left(l.tuple) != node.join_key_right(r.tuple)) continue;
                    Tuple t = concat(l.tuple, r.tuple);
                    if (not node.predicate(t)) continue;
                    out.push_back({std::move(t), l.sketch | r.sketch, l.multiplicity * r.multiplicity,
                                   DeltaTag::insert});
                }
            return out;
        }

        case NodeKind::aggregate: {
            struct Group { PlainGroup acc; Sketch sketch; };
            std::map<Tuple, Group> groups;
            for (const auto &a : eval_annotated_node(node.child(), db)) {
                auto &g = groups[node.group_key(a.tuple)];
                g.acc.add(node, a.tuple, a.multiplicity);
                g.sketch |= a.sketch;
            }
            for (const auto &[key, g] : groups) out.push_back({g.acc.result(node, key), g.sketch, 1, DeltaTag::insert});
            return out;
        }

        case NodeKind::topk: {
            std::map<std::pair<Tuple, Sketch>, std::int64_t> consolidated;
            for (const auto &a : eval_annotated_node(node.child(), db))
                consolidated[{a.tuple, a.sketch}] += a.multiplicity;
            std::vector<AnnotatedTuple> all;
            for (const auto &[k, n] : consolidated) all.push_back({k.first, k.second, n, DeltaTag::insert});
            std::sort(all.begin(), all.end(), [&](const AnnotatedTuple &a, const AnnotatedTuple &b) {
                int c = compare_order(node, node.order_key(a.tuple), node.order_key(b.tuple));
                if (c != 0) return c < 0;
                if (a.tuple != b.tuple) return a.tuple < b.tuple;
                return a.sketch < b.sketch;
            });
            std::int64_t pos = 0, k = static_cast<std::int64_t>(node.k);
            for (auto &a : all) {
                if (pos >= k) break;
                a.multiplicity = std::min(a.multiplicity, k - pos);
                pos += a.multiplicity;
                out.push_back(std::move(a));
            }
            return out;
        }

        case NodeKind::merge:
            return eval_annotated_node(node.child(), db);
    }
    return out;
}

}

/** Annotated result of `plan` (a merge root is ignored). */
inline AnnotatedRelation eval_annotated(const Plan &plan, const AnnotatedDatabase &db)
{
    BoundNode root = bind(without_merge(plan), AnnotatedSchemas(db));
    return {root.schema, detail::eval_annotated_node(root, db)};
}

/** The accurate sketch: fragments referenced by at least one result tuple. */
inline Sketch eval_sketch(const Plan &plan, const AnnotatedDatabase &db)
{
    return frag_set(frags_in(eval_annotated(plan, db)));
}

inline Sketch eval_sketch(const Plan &plan, const Database &db, const PartitionCatalog &catalog)
{
    return eval_sketch(plan, annotate(db, catalog));
}

}
