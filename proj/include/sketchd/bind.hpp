#pragma once

#include <sketchd/plan.hpp>
#include <sketchd/relation.hpp>

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>


namespace sketchd {

/** Expression resolved against a schema: attribute names become positions, kinds are checked. */
class CompiledExpr
{
    Expr::Op op_ = Expr::Op::constant;
    Kind kind_ = Kind::i64;
    Value constant_;
    std::size_t index_ = 0;
    std::shared_ptr<const CompiledExpr> lhs_, rhs_;

    public:
    CompiledExpr() = default;

    CompiledExpr(const Expr &e, const Schema &schema) : op_(e.op) {
        switch (e.op) {
            case Expr::Op::constant:
                constant_ = e.constant;
                kind_ = e.constant.kind();
                break;
            case Expr::Op::attribute:
                index_ = schema.index_of(e.name);
                kind_ = schema.attributes[index_].kind;
                break;
            default: {
                auto l = std::make_shared<const CompiledExpr>(*e.lhs, schema);
                auto r = std::make_shared<const CompiledExpr>(*e.rhs, schema);
                if (l->kind() != r->kind() or l->kind() == Kind::str)
                    throw type_mismatch("arithmetic over " + std::string(kind_name(l->kind())) + " and " +
                                        std::string(kind_name(r->kind())));
                kind_ = l->kind();
                lhs_ = std::move(l);
                rhs_ = std::move(r);
            }
        }
    }

    Kind kind() const { return kind_; }
    bool is_attribute() const { return op_ == Expr::Op::attribute; }
    bool is_constant() const { return op_ == Expr::Op::constant; }
    std::size_t index() const { return index_; }
    const Value & constant() const { return constant_; }

    Value operator()(const Tuple &t) const {
        switch (op_) {
            case Expr::Op::constant: return constant_;
            case Expr::Op::attribute: return t[index_];
            case Expr::Op::add: return add((*lhs_)(t), (*rhs_)(t));
            case Expr::Op::sub: return sub((*lhs_)(t), (*rhs_)(t));
            case Expr::Op::mul: return mul((*lhs_)(t), (*rhs_)(t));
        }
        return {};
    }
};

inline bool holds(CmpOp op, int c)
{
    switch (op) {
        case CmpOp::eq: return c == 0;
        case CmpOp::ne: return c != 0;
        case CmpOp::lt: return c < 0;
        case CmpOp::le: return c <= 0;
        case CmpOp::gt: return c > 0;
        case CmpOp::ge: return c >= 0;
    }
    return false;
}

class CompiledPredicate
{
    Predicate::Op op_ = Predicate::Op::always;
    CmpOp cmp_ = CmpOp::eq;
    CompiledExpr lhs_, rhs_;
    std::vector<CompiledPredicate> children_;

    public:
    CompiledPredicate() = default;

    CompiledPredicate(const Predicate &p, const Schema &schema) : op_(p.op), cmp_(p.cmp) {
        if (p.op == Predicate::Op::compare) {
            lhs_ = CompiledExpr(p.lhs, schema);
            rhs_ = CompiledExpr(p.rhs, schema);
            if (lhs_.kind() != rhs_.kind())
                throw type_mismatch("cannot compare " + std::string(kind_name(lhs_.kind())) + " with " +
                                    std::string(kind_name(rhs_.kind())));
        }
        for (const auto &c : p.children) children_.emplace_back(c, schema);
    }

    bool is_true() const { return op_ == Predicate::Op::always; }

    bool operator()(const Tuple &t) const {
        switch (op_) {
            case Predicate::Op::always: return true;
            case Predicate::Op::never: return false;
            case Predicate::Op::compare: {
                if (lhs_.is_attribute() and rhs_.is_constant())
                    return holds(cmp_, compare(t[lhs_.index()], rhs_.constant()));
                if (lhs_.is_attribute() and rhs_.is_attribute())
                    return holds(cmp_, compare(t[lhs_.index()], t[rhs_.index()]));
                return holds(cmp_, compare(lhs_(t), rhs_(t)));
            }
            case Predicate::Op::conj:
                for (const auto &c : children_) if (not c(t)) return false;
                return true;
            case Predicate::Op::disj:
                for (const auto &c : children_) if (c(t)) return true;
                return false;
            case Predicate::Op::negate: return not children_.front()(t);
        }
        return false;
    }
};

struct BoundAgg
{
    AggFn fn;
    std::optional<std::size_t> argument;
    Kind argument_kind = Kind::i64;
    Kind output_kind = Kind::i64;
};

struct BoundOrder
{
    std::size_t index;
    bool descending;
};

/** One operator of a plan resolved against concrete schemas.  Node ids are assigned in pre-order. */
struct BoundNode
{
    std::size_t id = 0;
    NodeKind kind = NodeKind::table;
    Schema schema;                        ///< output schema
    std::string relation;                 ///< table
    CompiledPredicate predicate;          ///< select; join residual (over the concatenated schema)
    std::vector<CompiledExpr> projections;
    std::vector<std::pair<std::size_t, std::size_t>> equi_keys; ///< join: (left position, right position)
    std::vector<std::size_t> group_by;
    std::vector<BoundAgg> aggs;
    std::size_t k = 0;
    std::vector<BoundOrder> order;
    std::vector<BoundNode> children;
    Plan plan;                            ///< the unbound subtree rooted here

    const BoundNode & child(std::size_t i = 0) const { return children[i]; }

    bool stateful() const { return kind == NodeKind::aggregate or kind == NodeKind::topk or kind == NodeKind::merge; }

    Tuple join_key_left(const Tuple &t) const {
        Tuple k;
        k.reserve(equi_keys.size());
        for (auto [l, _] : equi_keys) k.push_back(t[l]);
        return k;
    }
    Tuple join_key_right(const Tuple &t) const {
        Tuple k;
        k.reserve(equi_keys.size());
        for (auto [_, r] : equi_keys) k.push_back(t[r]);
        return k;
    }

    Tuple group_key(const Tuple &t) const {
        Tuple g;
        g.reserve(group_by.size());
        for (auto i : group_by) g.push_back(t[i]);
        return g;
    }

    Tuple order_key(const Tuple &t) const {
        Tuple o;
        o.reserve(order.size());
        for (const auto &ord : order) o.push_back(t[ord.index]);
        return o;
    }
};

/** Compares two order keys of `node`, honouring per-attribute direction. */
inline int compare_order(const BoundNode &node, const Tuple &a, const Tuple &b)
{
    for (std::size_t i = 0; i != node.order.size(); ++i) {
        if (a[i] == b[i]) continue;
        bool less = a[i] < b[i];
        if (node.order[i].descending) less = not less;
        return less ? -1 : 1;
    }
    return 0;
}

namespace detail {

inline void collect_conjuncts(const Predicate &p, std::vector<Predicate> &out)
{
    if (p.op == Predicate::Op::conj)
        for (const auto &c : p.children) collect_conjuncts(c, out);
    else if (not p.is_true())
        out.push_back(p);
}

inline BoundNode bind_node(const Plan &plan, const RowSource &catalog, std::size_t &next_id, bool root)
{
    BoundNode n;
    n.id = next_id++;
    n.kind = plan->kind;
    n.plan = plan;
    for (const auto &c : plan->children) n.children.push_back(bind_node(c, catalog, next_id, false));

    switch (plan->kind) {
        case NodeKind::table:
            n.relation = plan->relation;
            n.schema = catalog.schema(plan->relation);
            break;

        case NodeKind::select:
            n.schema = n.child().schema;
            n.predicate = CompiledPredicate(plan->predicate, n.schema);
            break;

        case NodeKind::project: {
            std::vector<Attribute> attrs;
            for (const auto &ne : plan->projections) {
                n.projections.emplace_back(ne.expr, n.child().schema);
                std::string name = ne.name;
                if (name.empty()) {
                    if (not ne.expr.is_attribute()) throw invalid_plan("projection of an expression needs a name");
                    name = ne.expr.name;
                }
                attrs.push_back({std::move(name), n.projections.back().kind()});
            }
            n.schema = Schema(n.child().schema.name, std::move(attrs));
            break;
        }

        case NodeKind::join: {
            const Schema &l = n.child(0).schema, &r = n.child(1).schema;
            std::vector<Attribute> attrs = l.attributes;
            attrs.insert(attrs.end(), r.attributes.begin(), r.attributes.end());
            try {
                n.schema = Schema(l.name + "_" + r.name, std::move(attrs));
            } catch (const schema_mismatch &e) {
                throw invalid_plan(std::string("join inputs share attribute names: ") + e.what());
            }
            std::vector<Predicate> conjuncts, residual;
            collect_conjuncts(plan->predicate, conjuncts);
            for (auto &c : conjuncts) {
                if (c.op == Predicate::Op::compare and c.cmp == CmpOp::eq and c.lhs.is_attribute() and
                    c.rhs.is_attribute())
                {
                    auto li = l.find(c.lhs.name), ri = r.find(c.rhs.name);
                    if (not li or not ri) { li = l.find(c.rhs.name); ri = r.find(c.lhs.name); }
                    if (li and ri) {
                        if (l.attributes[*li].kind != r.attributes[*ri].kind)
                            throw type_mismatch("join keys '" + c.lhs.name + "' and '" + c.rhs.name +
                                                "' have different kinds");
                        n.equi_keys.emplace_back(*li, *ri);
                        continue;
                    }
                }
                residual.push_back(std::move(c));
            }
            n.predicate = CompiledPredicate(Predicate::all_of(std::move(residual)), n.schema);
            break;
        }

        case NodeKind::aggregate: {
            const Schema &in = n.child().schema;
            std::vector<Attribute> attrs;
            for (const auto &g : plan->group_by) {
                n.group_by.push_back(in.index_of(g));
                attrs.push_back(in.attributes[n.group_by.back()]);
            }
            for (const auto &a : plan->aggregates) {
                BoundAgg b{a.fn, std::nullopt, Kind::i64, Kind::i64};
                if (not a.argument.empty()) {
                    b.argument = in.index_of(a.argument);
                    b.argument_kind = in.attributes[*b.argument].kind;
                } else if (a.fn != AggFn::count) {
                    throw invalid_plan(std::string(agg_name(a.fn)) + " needs an argument");
                }
                switch (a.fn) {
                    case AggFn::count: b.output_kind = Kind::i64; break;
                    case AggFn::avg: b.output_kind = Kind::f64; break;
                    case AggFn::sum: b.output_kind = b.argument_kind; break;
                    case AggFn::min:
                    case AggFn::max: b.output_kind = b.argument_kind; break;
                }
                if ((a.fn == AggFn::sum or a.fn == AggFn::avg) and b.argument_kind == Kind::str)
                    throw type_mismatch(std::string(agg_name(a.fn)) + " over non-numeric attribute '" + a.argument +
                                        "'");
                if (a.output.empty()) throw invalid_plan("aggregate output needs a name");
                n.aggs.push_back(b);
                attrs.push_back({a.output, b.output_kind});
            }
            n.schema = Schema(in.name, std::move(attrs));
            break;
        }

        case NodeKind::topk:
            n.schema = n.child().schema;
            n.k = plan->k;
            for (const auto &o : plan->order) n.order.push_back({n.schema.index_of(o.attribute), o.descending});
            break;

        case NodeKind::merge:
            if (not root) throw invalid_plan("merge is only allowed at the root of a plan");
            n.schema = n.child().schema;
            break;
    }
    return n;
}

}

/** Resolves `plan` against the schemas provided by `catalog`. */
inline BoundNode bind(const Plan &plan, const RowSource &catalog)
{
    std::size_t next_id = 0;
    return detail::bind_node(plan, catalog, next_id, true);
}

/** Number of nodes in a bound tree. */
inline std::size_t node_count(const BoundNode &n)
{
    std::size_t c = 1;
    for (const auto &ch : n.children) c += node_count(ch);
    return c;
}

}
