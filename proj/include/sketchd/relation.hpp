#pragma once

#include <sketchd/error.hpp>
#include <sketchd/value.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>


namespace sketchd {

struct Attribute
{
    std::string name;
    Kind kind = Kind::i64;

    friend bool operator==(const Attribute&, const Attribute&) = default;
};

/** Relation schema: a name plus an ordered list of uniquely named, typed attributes. */
struct Schema
{
    std::string name;
    std::vector<Attribute> attributes;

    Schema() = default;
    Schema(std::string name, std::vector<Attribute> attributes)
        : name(std::move(name))
        , attributes(std::move(attributes))
    {
        for (std::size_t i = 0; i != this->attributes.size(); ++i)
            for (std::size_t j = i + 1; j != this->attributes.size(); ++j)
                if (this->attributes[i].name == this->attributes[j].name)
                    throw schema_mismatch("duplicate attribute '" + this->attributes[i].name + "' in schema '" +
                                          this->name + "'");
    }

    std::size_t arity() const { return attributes.size(); }

    std::optional<std::size_t> find(std::string_view attr) const {
        for (std::size_t i = 0; i != attributes.size(); ++i)
            if (attributes[i].name == attr) return i;
        return std::nullopt;
    }

    std::size_t index_of(std::string_view attr) const {
        if (auto i = find(attr)) return *i;
        throw unknown_attribute("no attribute '" + std::string(attr) + "' in schema '" + name + "'");
    }

    /** Same attribute names and kinds (the relation name is ignored). */
    bool compatible(const Schema &other) const { return attributes == other.attributes; }

    /** Throws unless `t` has the arity and kinds of this schema. */
    void check(const Tuple &t) const {
        if (t.size() != arity())
            throw type_mismatch("tuple arity " + std::to_string(t.size()) + " does not match schema '" + name +
                                "' of arity " + std::to_string(arity()));
        for (std::size_t i = 0; i != t.size(); ++i)
            if (t[i].kind() != attributes[i].kind)
                throw type_mismatch("attribute '" + attributes[i].name + "' of '" + name + "' expects " +
                                    std::string(kind_name(attributes[i].kind)) + ", got " +
                                    std::string(kind_name(t[i].kind())));
    }

    friend bool operator==(const Schema&, const Schema&) = default;
};

/** A bag of tuples with consolidated, strictly positive multiplicities. */
struct BagRelation
{
    Schema schema;
    std::map<Tuple, std::int64_t> rows;

    BagRelation() = default;
    explicit BagRelation(Schema schema) : schema(std::move(schema)) { }

    void add(const Tuple &t, std::int64_t n = 1) {
        if (n <= 0) return;
        rows[t] += n;
    }

    /** Removes `n` copies of `t`; throws if fewer are present. */
    void remove(const Tuple &t, std::int64_t n = 1) {
        auto it = rows.find(t);
        if (it == rows.end() or it->second < n)
            throw ill_formed_delta("cannot delete " + std::to_string(n) + " copies of " + to_string(t) + " from '" +
                                   schema.name + "'");
        if ((it->second -= n) == 0) rows.erase(it);
    }

    std::int64_t multiplicity(const Tuple &t) const {
        auto it = rows.find(t);
        return it == rows.end() ? 0 : it->second;
    }

    /** Total number of tuples counting multiplicities. */
    std::int64_t size() const {
        std::int64_t n = 0;
        for (const auto &[_, m] : rows) n += m;
        return n;
    }

    bool empty() const { return rows.empty(); }

    /** Equality of contents; only attribute kinds and names of the schemas must agree. */
    friend bool operator==(const BagRelation &a, const BagRelation &b) {
        return a.schema.compatible(b.schema) and a.rows == b.rows;
    }
};

enum class DeltaTag : std::uint8_t { insert, remove };

inline char tag_char(DeltaTag t) { return t == DeltaTag::insert ? '+' : '-'; }

struct DeltaTuple
{
    DeltaTag tag = DeltaTag::insert;
    Tuple tuple;
    std::int64_t multiplicity = 1;

    friend bool operator==(const DeltaTuple&, const DeltaTuple&) = default;
};

struct DeltaRelation
{
    Schema schema;
    std::vector<DeltaTuple> rows;

    DeltaRelation() = default;
    explicit DeltaRelation(Schema schema) : schema(std::move(schema)) { }

    void insert(Tuple t, std::int64_t n = 1) { rows.push_back({DeltaTag::insert, std::move(t), n}); }
    void remove(Tuple t, std::int64_t n = 1) { rows.push_back({DeltaTag::remove, std::move(t), n}); }

    bool empty() const { return rows.empty(); }

    /** Number of delta tuples counting multiplicities. */
    std::int64_t size() const {
        std::int64_t n = 0;
        for (const auto &r : rows) n += r.multiplicity;
        return n;
    }

    /** Signed net multiplicity per tuple, with zero entries dropped. */
    std::map<Tuple, std::int64_t> net() const {
        std::map<Tuple, std::int64_t> out;
        for (const auto &r : rows)
            out[r.tuple] += r.tag == DeltaTag::insert ? r.multiplicity : -r.multiplicity;
        std::erase_if(out, [](const auto &e) { return e.second == 0; });
        return out;
    }
};

struct Database
{
    std::map<std::string, BagRelation, std::less<>> relations;

    const BagRelation & at(std::string_view name) const {
        auto it = relations.find(name);
        if (it == relations.end()) throw unknown_relation("unknown relation '" + std::string(name) + "'");
        return it->second;
    }
    BagRelation & at(std::string_view name) {
        auto it = relations.find(name);
        if (it == relations.end()) throw unknown_relation("unknown relation '" + std::string(name) + "'");
        return it->second;
    }

    void add(BagRelation r) { auto name = r.schema.name; relations.insert_or_assign(std::move(name), std::move(r)); }

    friend bool operator==(const Database&, const Database&) = default;
};

struct DeltaDatabase
{
    std::map<std::string, DeltaRelation, std::less<>> relations;

    bool empty() const {
        for (const auto &[_, d] : relations)
            if (not d.empty()) return false;
        return true;
    }

    std::int64_t size() const {
        std::int64_t n = 0;
        for (const auto &[_, d] : relations) n += d.size();
        return n;
    }
};

/** Applies a delta: D - deletes + inserts.  Throws `ill_formed_delta` when a delete exceeds the multiplicity present in
 * `db`. */
inline Database apply_delta(Database db, const DeltaDatabase &delta)
{
    for (const auto &[name, d] : delta.relations) {
        auto &rel = db.at(name);
        if (not rel.schema.compatible(d.schema) and not d.schema.attributes.empty())
            throw schema_mismatch("delta schema does not match relation '" + name + "'");
        // well-formedness is judged against the input database, so deletes go first
        for (const auto &r : d.rows)
            if (r.tag == DeltaTag::remove) rel.remove(r.tuple, r.multiplicity);
        for (const auto &r : d.rows)
            if (r.tag == DeltaTag::insert) {
                rel.schema.check(r.tuple);
                rel.add(r.tuple, r.multiplicity);
            }
    }
    return db;
}

/** Symmetric difference: deletes tagged for tuples only in (or more often in) `d1`, inserts for the converse. */
inline DeltaDatabase diff(const Database &d1, const Database &d2)
{
    if (d1.relations.size() != d2.relations.size())
        throw schema_mismatch("databases have different relations");
    DeltaDatabase out;
    for (const auto &[name, r1] : d1.relations) {
        auto it = d2.relations.find(name);
        if (it == d2.relations.end()) throw schema_mismatch("relation '" + name + "' missing in second database");
        const auto &r2 = it->second;
        if (not r1.schema.compatible(r2.schema)) throw schema_mismatch("schemas of '" + name + "' differ");

        DeltaRelation d(r1.schema);
        auto a = r1.rows.begin(), b = r2.rows.begin();
        while (a != r1.rows.end() or b != r2.rows.end()) {
            if (b == r2.rows.end() or (a != r1.rows.end() and a->first < b->first)) {
                d.remove(a->first, a->second);
                ++a;
            } else if (a == r1.rows.end() or b->first < a->first) {
                d.insert(b->first, b->second);
                ++b;
            } else {
                if (a->second > b->second) d.remove(a->first, a->second - b->second);
                else if (b->second > a->second) d.insert(a->first, b->second - a->second);
                ++a; ++b;
            }
        }
        if (not d.empty()) out.relations.emplace(name, std::move(d));
    }
    return out;
}

/** Callback receiving one row and its multiplicity. */
using RowVisitor = std::function<void(const Tuple&, std::int64_t)>;

/** Anything that can enumerate the rows of named relations: an in-memory database, a store snapshot, ... */
class RowSource
{
    public:
    virtual ~RowSource() = default;
    virtual const Schema & schema(std::string_view relation) const = 0;
    virtual void scan(std::string_view relation, const RowVisitor &visit) const = 0;
};

class DatabaseSource : public RowSource
{
    const Database &db_;

    public:
    explicit DatabaseSource(const Database &db) : db_(db) { }

    const Schema & schema(std::string_view relation) const override { return db_.at(relation).schema; }

    void scan(std::string_view relation, const RowVisitor &visit) const override {
        for (const auto &[t, n] : db_.at(relation).rows) visit(t, n);
    }
};

/** Same schemas as the wrapped source, but every relation is empty. */
class EmptySource : public RowSource
{
    const RowSource &schemas_;

    public:
    explicit EmptySource(const RowSource &schemas) : schemas_(schemas) { }
    const Schema & schema(std::string_view relation) const override { return schemas_.schema(relation); }
    void scan(std::string_view, const RowVisitor&) const override { }
};

}
