#pragma once

#include <sketchd/error.hpp>
#include <sketchd/partition.hpp>
#include <sketchd/plan.hpp>
#include <sketchd/relation.hpp>
#include <sketchd/sketch.hpp>

#include <json.hpp>

#include <string>
#include <vector>


namespace sketchd::codec {

using json = nlohmann::json;

inline json to_json(const Value &v)
{
    switch (v.kind()) {
        case Kind::i64: return v.as_int();
        case Kind::f64: return v.as_float();
        case Kind::str: return v.as_string();
    }
    return nullptr;
}

inline Value value_from_json(const json &j)
{
    if (j.is_number_integer()) return Value(j.get<std::int64_t>());
    if (j.is_number_float()) return Value(j.get<double>());
    if (j.is_string()) return Value(j.get<std::string>());
    throw invalid_plan("expected a value, got " + j.dump());
}

inline json to_json(const Tuple &t)
{
    json a = json::array();
    for (const auto &v : t) a.push_back(to_json(v));
    return a;
}

inline Tuple tuple_from_json(const json &j)
{
    if (not j.is_array()) throw invalid_plan("expected a tuple array, got " + j.dump());
    Tuple t;
    for (const auto &v : j) t.push_back(value_from_json(v));
    return t;
}

/** Converts `t` to the kinds of `schema`, accepting integers where floats are expected. */
inline Tuple coerce(Tuple t, const Schema &schema)
{
    if (t.size() != schema.arity())
        throw type_mismatch("tuple " + to_string(t) + " does not have the arity of '" + schema.name + "'");
    for (std::size_t i = 0; i != t.size(); ++i)
        if (schema.attributes[i].kind == Kind::f64 and t[i].is_int()) t[i] = Value(static_cast<double>(t[i].as_int()));
    schema.check(t);
    return t;
}

inline json to_json(const Sketch &s)
{
    json a = json::array();
    s.for_each([&](FragmentId f) { a.push_back(f); });
    return a;
}

inline Sketch sketch_from_json(const json &j)
{
    Sketch s;
    for (const auto &f : j) s.set(f.get<FragmentId>());
    return s;
}

inline json to_json(const Schema &s)
{
    json attrs = json::array();
    for (const auto &a : s.attributes) attrs.push_back({{"name", a.name}, {"kind", std::string(kind_name(a.kind))}});
    return {{"name", s.name}, {"attributes", attrs}};
}

inline Schema schema_from_json(const json &j)
{
    std::vector<Attribute> attrs;
    for (const auto &a : j.at("attributes"))
        attrs.push_back({a.at("name").get<std::string>(), parse_kind(a.at("kind").get<std::string>())});
    return Schema(j.at("name").get<std::string>(), std::move(attrs));
}

/*----- expressions and predicates -----------------------------------------------------------------------------------*/

inline json to_json(const Expr &e)
{
    switch (e.op) {
        case Expr::Op::constant: return {{"const", to_json(e.constant)}};
        case Expr::Op::attribute: return {{"attr", e.name}};
        case Expr::Op::add: return {{"op", "+"}, {"lhs", to_json(*e.lhs)}, {"rhs", to_json(*e.rhs)}};
        case Expr::Op::sub: return {{"op", "-"}, {"lhs", to_json(*e.lhs)}, {"rhs", to_json(*e.rhs)}};
        case Expr::Op::mul: return {{"op", "*"}, {"lhs", to_json(*e.lhs)}, {"rhs", to_json(*e.rhs)}};
    }
    return nullptr;
}

/** Accepts the object forms plus two shorthands: a bare string is an attribute, a bare number a constant. */
inline Expr expr_from_json(const json &j)
{
    if (j.is_string()) return col(j.get<std::string>());
    if (j.is_number()) return Expr(value_from_json(j));
    if (not j.is_object()) throw invalid_plan("malformed expression " + j.dump());
    if (j.contains("attr")) return col(j.at("attr").get<std::string>());
    if (j.contains("const")) return Expr(value_from_json(j.at("const")));
    if (j.contains("op")) {
        auto op = j.at("op").get<std::string>();
        Expr l = expr_from_json(j.at("lhs")), r = expr_from_json(j.at("rhs"));
        if (op == "+") return l + r;
        if (op == "-") return l - r;
        if (op == "*") return l * r;
        throw invalid_plan("unknown arithmetic operator '" + op + "'");
    }
    throw invalid_plan("malformed expression " + j.dump());
}

inline json to_json(const Predicate &p)
{
    switch (p.op) {
        case Predicate::Op::always: return {{"true", true}};
        case Predicate::Op::never: return {{"false", true}};
        case Predicate::Op::compare:
            return {{"cmp", std::string(cmp_symbol(p.cmp))}, {"lhs", to_json(p.lhs)}, {"rhs", to_json(p.rhs)}};
        case Predicate::Op::conj:
        case Predicate::Op::disj: {
            json a = json::array();
            for (const auto &c : p.children) a.push_back(to_json(c));
            return {{p.op == Predicate::Op::conj ? "and" : "or", a}};
        }
        case Predicate::Op::negate: return {{"not", to_json(p.children.front())}};
    }
    return nullptr;
}

inline Predicate predicate_from_json(const json &j)
{
    if (not j.is_object()) throw invalid_plan("malformed predicate " + j.dump());
    if (j.contains("true")) return Predicate::truth();
    if (j.contains("false")) return Predicate::falsity();
    if (j.contains("cmp"))
        return Predicate::comparison(parse_cmp(j.at("cmp").get<std::string>()), expr_from_json(j.at("lhs")),
                                     expr_from_json(j.at("rhs")));
    if (j.contains("and") or j.contains("or")) {
        bool conj = j.contains("and");
        std::vector<Predicate> cs;
        for (const auto &c : j.at(conj ? "and" : "or")) cs.push_back(predicate_from_json(c));
        if (cs.size() == 1) return std::move(cs.front());
        Predicate p;
        p.op = conj ? Predicate::Op::conj : Predicate::Op::disj;
        p.children = std::move(cs);
        if (p.children.empty()) return conj ? Predicate::truth() : Predicate::falsity();
        return p;
    }
    if (j.contains("not")) return !predicate_from_json(j.at("not"));
    throw invalid_plan("malformed predicate " + j.dump());
}

/*----- plans --------------------------------------------------------------------------------------------------------*/

inline json to_json(const Plan &p)
{
    const PlanNode &n = *p;
    switch (n.kind) {
        case NodeKind::table: return {{"table", n.relation}};
        case NodeKind::select: return {{"select", to_json(n.predicate)}, {"input", to_json(n.children[0])}};
        case NodeKind::project: {
            json a = json::array();
            for (const auto &ne : n.projections) a.push_back({{"expr", to_json(ne.expr)}, {"as", ne.name}});
            return {{"project", a}, {"input", to_json(n.children[0])}};
        }
        case NodeKind::join:
            return {{"join", to_json(n.predicate)}, {"left", to_json(n.children[0])}, {"right", to_json(n.children[1])}};
        case NodeKind::aggregate: {
            json aggs = json::array();
            for (const auto &a : n.aggregates)
                aggs.push_back({{"fn", std::string(agg_name(a.fn))}, {"arg", a.argument}, {"as", a.output}});
            return {{"aggregate", {{"group_by", n.group_by}, {"aggs", aggs}}}, {"input", to_json(n.children[0])}};
        }
        case NodeKind::topk: {
            json order = json::array();
            for (const auto &o : n.order) order.push_back({{"attr", o.attribute}, {"desc", o.descending}});
            return {{"topk", {{"k", n.k}, {"order", order}}}, {"input", to_json(n.children[0])}};
        }
        case NodeKind::merge: return {{"merge", to_json(n.children[0])}};
    }
    return nullptr;
}

inline Plan plan_from_json(const json &j)
{
    if (not j.is_object()) throw invalid_plan("malformed plan " + j.dump());
    if (j.contains("table")) return table(j.at("table").get<std::string>());
    if (j.contains("select")) return select(plan_from_json(j.at("input")), predicate_from_json(j.at("select")));
    if (j.contains("project")) {
        std::vector<NamedExpr> exprs;
        for (const auto &e : j.at("project")) {
            if (e.is_string()) { exprs.push_back({col(e.get<std::string>()), e.get<std::string>()}); continue; }
            exprs.push_back({expr_from_json(e.at("expr")), e.value("as", std::string())});
        }
        return project(plan_from_json(j.at("input")), std::move(exprs));
    }
    if (j.contains("join")) {
        Predicate p = j.at("join").is_null() ? Predicate::truth() : predicate_from_json(j.at("join"));
        return join(plan_from_json(j.at("left")), plan_from_json(j.at("right")), std::move(p));
    }
    if (j.contains("aggregate")) {
        const auto &a = j.at("aggregate");
        std::vector<AggSpec> aggs;
        for (const auto &s : a.at("aggs"))
            aggs.push_back({parse_agg(s.at("fn").get<std::string>()), s.value("arg", std::string()),
                            s.at("as").get<std::string>()});
        return aggregate(plan_from_json(j.at("input")), a.value("group_by", std::vector<std::string>{}),
                         std::move(aggs));
    }
    if (j.contains("topk")) {
        const auto &t = j.at("topk");
        std::vector<OrderSpec> order;
        for (const auto &o : t.at("order")) order.push_back({o.at("attr").get<std::string>(), o.value("desc", false)});
        return top_k(plan_from_json(j.at("input")), t.at("k").get<std::size_t>(), std::move(order));
    }
    if (j.contains("merge")) return merge(plan_from_json(j.at("merge")));
    throw invalid_plan("malformed plan " + j.dump());
}

inline Plan parse_plan(const std::string &text)
{
    try {
        return plan_from_json(json::parse(text));
    } catch (const json::exception &e) {
        throw invalid_plan(std::string("plan is not valid JSON: ") + e.what());
    }
}

/*----- partitions ---------------------------------------------------------------------------------------------------*/

inline json to_json(const RangePartition &p)
{
    json b = json::array();
    for (const auto &v : p.boundaries()) b.push_back(to_json(v));
    return {{"relation", p.relation()}, {"attribute", p.attribute()}, {"boundaries", b}};
}

/** Boundaries may be given as numbers of the wrong kind (e.g. integers for a float attribute) when `kind` is known. */
inline RangePartition partition_from_json(const json &j, std::optional<Kind> kind = std::nullopt)
{
    std::vector<Value> b;
    for (const auto &v : j.at("boundaries")) {
        Value x = value_from_json(v);
        if (kind == Kind::f64 and x.is_int()) x = Value(static_cast<double>(x.as_int()));
        b.push_back(std::move(x));
    }
    return RangePartition(j.at("relation").get<std::string>(), j.at("attribute").get<std::string>(), std::move(b));
}

inline json to_json(const PartitionCatalog &c)
{
    json a = json::array();
    for (const auto &p : c.partitions()) a.push_back(to_json(p));
    return a;
}

inline PartitionCatalog catalog_from_json(const json &j)
{
    PartitionCatalog c;
    for (const auto &p : j) c.add(partition_from_json(p));
    return c;
}

}
