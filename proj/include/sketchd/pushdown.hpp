#pragma once

#include <sketchd/plan.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>


namespace sketchd {

/** Per base relation, the condition every relevant delta tuple must satisfy.  Relations without an entry have to be
 * extracted in full. */
struct PushdownPlan
{
    std::map<std::string, Predicate, std::less<>> predicates;

    std::optional<Predicate> for_relation(std::string_view relation) const {
        auto it = predicates.find(relation);
        if (it == predicates.end()) return std::nullopt;
        return it->second;
    }

    bool empty() const { return predicates.empty(); }
};

namespace detail {

using Substitution = std::map<std::string, Expr, std::less<>>;

inline Expr substitute(const Expr &e, const Substitution *s)
{
    if (not s) return e;
    switch (e.op) {
        case Expr::Op::constant: return e;
        case Expr::Op::attribute: {
            auto it = s->find(e.name);
            return it == s->end() ? e : it->second;
        }
        default: return Expr::binary(e.op, substitute(*e.lhs, s), substitute(*e.rhs, s));
    }
}

inline Predicate substitute(const Predicate &p, const Substitution *s)
{
    Predicate out = p;
    if (p.op == Predicate::Op::compare) {
        out.lhs = substitute(p.lhs, s);
        out.rhs = substitute(p.rhs, s);
    }
    for (auto &c : out.children) c = substitute(c, s);
    return out;
}

}

/** Finds, for each base relation, the selections that sit above every one of its scans with only selections and
 * projections in between.  Conditions of different scans of the same relation are combined with OR. */
inline PushdownPlan plan_pushdown(const Plan &plan)
{
    std::map<std::string, std::vector<Predicate>, std::less<>> per_scan;
    std::map<std::string, bool, std::less<>> unfiltered;

    std::vector<const PlanNode*> path;
    auto visit = [&](auto &self, const Plan &n) -> void {
        if (n->kind == NodeKind::table) {
            // walk upwards through selections and projections, translating conditions into base attributes
            std::optional<detail::Substitution> subst;
            std::vector<Predicate> conds;
            for (auto it = path.rbegin(); it != path.rend(); ++it) {
                const PlanNode &a = **it;
                if (a.kind == NodeKind::select) {
                    conds.push_back(detail::substitute(a.predicate, subst ? &*subst : nullptr));
                } else if (a.kind == NodeKind::project) {
                    detail::Substitution next;
                    for (const auto &ne : a.projections) {
                        std::string name = ne.name.empty() ? ne.expr.name : ne.name;
                        next[name] = detail::substitute(ne.expr, subst ? &*subst : nullptr);
                    }
                    subst = std::move(next);
                } else {
                    break;
                }
            }
            if (conds.empty()) unfiltered[n->relation] = true;
            else per_scan[n->relation].push_back(Predicate::all_of(std::move(conds)));
            return;
        }
        path.push_back(&*n);
        for (const auto &c : n->children) self(self, c);
        path.pop_back();
    };
    visit(visit, plan);

    PushdownPlan out;
    for (auto &[rel, preds] : per_scan)
        if (not unfiltered.contains(rel)) out.predicates.emplace(rel, Predicate::any_of(std::move(preds)));
    return out;
}

}
