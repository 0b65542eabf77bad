#pragma once

#include <sketchd/error.hpp>
#include <sketchd/value.hpp>

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>


namespace sketchd {

/*======================================================================================================================
 * Scalar expressions
 *====================================================================================================================*/

/** Scalar expression over the attributes of one input schema: constants, attribute references, `+`, `-`, `*`. */
struct Expr
{
    enum class Op : std::uint8_t { constant, attribute, add, sub, mul };

    Op op = Op::constant;
    Value constant;
    std::string name; ///< attribute name for `Op::attribute`
    std::shared_ptr<const Expr> lhs, rhs;

    Expr() = default;

    template<typename T>
    requires std::constructible_from<Value, T> and (not std::convertible_to<T, std::string_view>)
    Expr(T v) : op(Op::constant), constant(Value(v)) { }

    Expr(Value v) : op(Op::constant), constant(std::move(v)) { }

    static Expr attr(std::string name) {
        Expr e;
        e.op = Op::attribute;
        e.name = std::move(name);
        return e;
    }

    static Expr binary(Op op, Expr l, Expr r) {
        Expr e;
        e.op = op;
        e.lhs = std::make_shared<const Expr>(std::move(l));
        e.rhs = std::make_shared<const Expr>(std::move(r));
        return e;
    }

    bool is_attribute() const { return op == Op::attribute; }

    /** Structural equality (`==` on expressions builds a predicate). */
    bool equals(const Expr &o) const {
        if (op != o.op) return false;
        switch (op) {
            case Op::constant: return constant == o.constant;
            case Op::attribute: return name == o.name;
            default: return lhs->equals(*o.lhs) and rhs->equals(*o.rhs);
        }
    }
};

inline Expr col(std::string name) { return Expr::attr(std::move(name)); }
inline Expr lit(Value v) { return Expr(std::move(v)); }

inline Expr operator+(Expr l, Expr r) { return Expr::binary(Expr::Op::add, std::move(l), std::move(r)); }
inline Expr operator-(Expr l, Expr r) { return Expr::binary(Expr::Op::sub, std::move(l), std::move(r)); }
inline Expr operator*(Expr l, Expr r) { return Expr::binary(Expr::Op::mul, std::move(l), std::move(r)); }

enum class CmpOp : std::uint8_t { eq, ne, lt, le, gt, ge };

inline std::string_view cmp_symbol(CmpOp op)
{
    switch (op) {
        case CmpOp::eq: return "=";
        case CmpOp::ne: return "!=";
        case CmpOp::lt: return "<";
        case CmpOp::le: return "<=";
        case CmpOp::gt: return ">";
        case CmpOp::ge: return ">=";
    }
    return "?";
}

inline CmpOp parse_cmp(std::string_view s)
{
    if (s == "=" or s == "==") return CmpOp::eq;
    if (s == "!=" or s == "<>") return CmpOp::ne;
    if (s == "<") return CmpOp::lt;
    if (s == "<=") return CmpOp::le;
    if (s == ">") return CmpOp::gt;
    if (s == ">=") return CmpOp::ge;
    throw invalid_plan("unknown comparison operator '" + std::string(s) + "'");
}

/** Boolean condition: comparisons combined with and/or/not. */
struct Predicate
{
    enum class Op : std::uint8_t { always, never, compare, conj, disj, negate };

    Op op = Op::always;
    CmpOp cmp = CmpOp::eq;
    Expr lhs, rhs;
    std::vector<Predicate> children;

    static Predicate truth() { return Predicate{}; }
    static Predicate falsity() { Predicate p; p.op = Op::never; return p; }

    static Predicate comparison(CmpOp cmp, Expr l, Expr r) {
        Predicate p;
        p.op = Op::compare;
        p.cmp = cmp;
        p.lhs = std::move(l);
        p.rhs = std::move(r);
        return p;
    }

    static Predicate all_of(std::vector<Predicate> ps) {
        if (ps.empty()) return truth();
        if (ps.size() == 1) return std::move(ps.front());
        Predicate p;
        p.op = Op::conj;
        p.children = std::move(ps);
        return p;
    }

    static Predicate any_of(std::vector<Predicate> ps) {
        if (ps.empty()) return falsity();
        if (ps.size() == 1) return std::move(ps.front());
        Predicate p;
        p.op = Op::disj;
        p.children = std::move(ps);
        return p;
    }

    bool is_true() const { return op == Op::always; }

    friend bool operator==(const Predicate &a, const Predicate &b) {
        if (a.op != b.op or a.children != b.children) return false;
        return a.op != Op::compare or (a.cmp == b.cmp and a.lhs.equals(b.lhs) and a.rhs.equals(b.rhs));
    }
};

inline Predicate operator==(Expr l, Expr r) { return Predicate::comparison(CmpOp::eq, std::move(l), std::move(r)); }
inline Predicate operator!=(Expr l, Expr r) { return Predicate::comparison(CmpOp::ne, std::move(l), std::move(r)); }
inline Predicate operator<(Expr l, Expr r) { return Predicate::comparison(CmpOp::lt, std::move(l), std::move(r)); }
inline Predicate operator<=(Expr l, Expr r) { return Predicate::comparison(CmpOp::le, std::move(l), std::move(r)); }
inline Predicate operator>(Expr l, Expr r) { return Predicate::comparison(CmpOp::gt, std::move(l), std::move(r)); }
inline Predicate operator>=(Expr l, Expr r) { return Predicate::comparison(CmpOp::ge, std::move(l), std::move(r)); }

inline Predicate operator&&(Predicate a, Predicate b)
{
    std::vector<Predicate> ps;
    for (auto *p : {&a, &b}) {
        if (p->op == Predicate::Op::conj)
            for (auto &c : p->children) ps.push_back(std::move(c));
        else if (not p->is_true())
            ps.push_back(std::move(*p));
    }
    return Predicate::all_of(std::move(ps));
}

inline Predicate operator||(Predicate a, Predicate b)
{
    std::vector<Predicate> ps;
    for (auto *p : {&a, &b}) {
        if (p->op == Predicate::Op::disj)
            for (auto &c : p->children) ps.push_back(std::move(c));
        else
            ps.push_back(std::move(*p));
    }
    return Predicate::any_of(std::move(ps));
}

inline Predicate operator!(Predicate a)
{
    Predicate p;
    p.op = Predicate::Op::negate;
    p.children.push_back(std::move(a));
    return p;
}


/*======================================================================================================================
 * Query plans
 *====================================================================================================================*/

enum class AggFn : std::uint8_t { sum, count, avg, min, max };

inline std::string_view agg_name(AggFn f)
{
    switch (f) {
        case AggFn::sum: return "sum";
        case AggFn::count: return "count";
        case AggFn::avg: return "avg";
        case AggFn::min: return "min";
        case AggFn::max: return "max";
    }
    return "?";
}

inline AggFn parse_agg(std::string_view s)
{
    if (s == "sum") return AggFn::sum;
    if (s == "count") return AggFn::count;
    if (s == "avg") return AggFn::avg;
    if (s == "min") return AggFn::min;
    if (s == "max") return AggFn::max;
    throw invalid_plan("unknown aggregate function '" + std::string(s) + "'");
}

struct AggSpec
{
    AggFn fn = AggFn::count;
    std::string argument; ///< may be empty for `count`
    std::string output;

    friend bool operator==(const AggSpec&, const AggSpec&) = default;
};

struct NamedExpr
{
    Expr expr;
    std::string name; ///< output attribute name; defaults to the referenced attribute

    friend bool operator==(const NamedExpr &a, const NamedExpr &b) { return a.name == b.name and a.expr.equals(b.expr); }
};

struct OrderSpec
{
    std::string attribute;
    bool descending = false;

    friend bool operator==(const OrderSpec&, const OrderSpec&) = default;
};

enum class NodeKind : std::uint8_t { table, select, project, join, aggregate, topk, merge };

inline std::string_view node_kind_name(NodeKind k)
{
    switch (k) {
        case NodeKind::table: return "table";
        case NodeKind::select: return "select";
        case NodeKind::project: return "project";
        case NodeKind::join: return "join";
        case NodeKind::aggregate: return "aggregate";
        case NodeKind::topk: return "topk";
        case NodeKind::merge: return "merge";
    }
    return "?";
}

struct PlanNode;

/** Immutable, cheaply copyable handle to a relational algebra tree. */
class Plan
{
    std::shared_ptr<const PlanNode> node_;

    public:
    Plan() = default;
    explicit Plan(std::shared_ptr<const PlanNode> n) : node_(std::move(n)) { }

    const PlanNode & operator*() const { return *node_; }
    const PlanNode * operator->() const { return node_.get(); }
    explicit operator bool() const { return bool(node_); }

    friend bool operator==(const Plan &a, const Plan &b);
};

struct PlanNode
{
    NodeKind kind = NodeKind::table;
    std::string relation;                ///< table
    Predicate predicate;                 ///< select, join
    std::vector<NamedExpr> projections;  ///< project
    std::vector<std::string> group_by;   ///< aggregate
    std::vector<AggSpec> aggregates;     ///< aggregate
    std::size_t k = 0;                   ///< topk
    std::vector<OrderSpec> order;        ///< topk
    std::vector<Plan> children;

    friend bool operator==(const PlanNode&, const PlanNode&) = default;
};

inline bool operator==(const Plan &a, const Plan &b)
{
    if (a.node_ == b.node_) return true;
    if (not a.node_ or not b.node_) return false;
    return *a.node_ == *b.node_;
}

inline Plan table(std::string relation)
{
    PlanNode n;
    n.kind = NodeKind::table;
    n.relation = std::move(relation);
    return Plan(std::make_shared<const PlanNode>(std::move(n)));
}

inline Plan select(Plan child, Predicate p)
{
    PlanNode n;
    n.kind = NodeKind::select;
    n.predicate = std::move(p);
    n.children.push_back(std::move(child));
    return Plan(std::make_shared<const PlanNode>(std::move(n)));
}

inline Plan project(Plan child, std::vector<NamedExpr> exprs)
{
    PlanNode n;
    n.kind = NodeKind::project;
    n.projections = std::move(exprs);
    n.children.push_back(std::move(child));
    return Plan(std::make_shared<const PlanNode>(std::move(n)));
}

/** Projection onto a list of attributes, keeping their names. */
inline Plan project(Plan child, const std::vector<std::string> &attrs)
{
    std::vector<NamedExpr> exprs;
    for (const auto &a : attrs) exprs.push_back({col(a), a});
    return project(std::move(child), std::move(exprs));
}

inline Plan join(Plan left, Plan right, Predicate p = Predicate::truth())
{
    PlanNode n;
    n.kind = NodeKind::join;
    n.predicate = std::move(p);
    n.children.push_back(std::move(left));
    n.children.push_back(std::move(right));
    return Plan(std::make_shared<const PlanNode>(std::move(n)));
}

inline Plan aggregate(Plan child, std::vector<std::string> group_by, std::vector<AggSpec> aggs)
{
    if (aggs.empty()) throw invalid_plan("aggregation needs at least one aggregate function");
    PlanNode n;
    n.kind = NodeKind::aggregate;
    n.group_by = std::move(group_by);
    n.aggregates = std::move(aggs);
    n.children.push_back(std::move(child));
    return Plan(std::make_shared<const PlanNode>(std::move(n)));
}

inline Plan top_k(Plan child, std::size_t k, std::vector<OrderSpec> order)
{
    if (k == 0) throw invalid_plan("top-k needs k >= 1");
    if (order.empty()) throw invalid_plan("top-k needs at least one order-by attribute");
    PlanNode n;
    n.kind = NodeKind::topk;
    n.k = k;
    n.order = std::move(order);
    n.children.push_back(std::move(child));
    return Plan(std::make_shared<const PlanNode>(std::move(n)));
}

inline Plan merge(Plan child)
{
    PlanNode n;
    n.kind = NodeKind::merge;
    n.children.push_back(std::move(child));
    return Plan(std::make_shared<const PlanNode>(std::move(n)));
}

/** Strips a Merge root, if present. */
inline Plan without_merge(const Plan &p)
{
    return p->kind == NodeKind::merge ? p->children.front() : p;
}

inline bool has_merge_root(const Plan &p) { return p->kind == NodeKind::merge; }

/** Names of the base relations referenced by the plan, in first-visit order, without duplicates. */
inline std::vector<std::string> base_relations(const Plan &p)
{
    std::vector<std::string> out;
    auto visit = [&](auto &self, const Plan &n) -> void {
        if (n->kind == NodeKind::table) {
            if (std::find(out.begin(), out.end(), n->relation) == out.end()) out.push_back(n->relation);
            return;
        }
        for (const auto &c : n->children) self(self, c);
    };
    visit(visit, p);
    return out;
}

/** Rebuilds `p` bottom-up, replacing every node for which `fn` returns a plan.  `fn` sees the node with already
 * rewritten children. */
template<typename Fn>
Plan rewrite(const Plan &p, Fn &&fn)
{
    PlanNode n = *p;
    bool changed = false;
    for (auto &c : n.children) {
        Plan nc = rewrite(c, fn);
        if (nc.operator->() != c.operator->()) { c = std::move(nc); changed = true; }
    }
    Plan rebuilt = changed ? Plan(std::make_shared<const PlanNode>(std::move(n))) : p;
    if (auto r = fn(rebuilt)) return *r;
    return rebuilt;
}

}
