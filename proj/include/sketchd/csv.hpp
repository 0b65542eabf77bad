#pragma once

#include <sketchd/error.hpp>
#include <sketchd/relation.hpp>

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>


namespace sketchd {

namespace csv {

/** Splits one CSV line into fields; double quotes enclose fields containing commas or quotes (`""` escapes). */
inline std::vector<std::string> split(std::string_view line, std::size_t lineno)
{
    std::vector<std::string> out;
    std::string field;
    bool quoted = false, was_quoted = false;
    for (std::size_t i = 0; i != line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 != line.size() and line[i + 1] == '"') { field += '"'; ++i; }
                else quoted = false;
            } else {
                field += c;
            }
        } else if (c == '"') {
            if (not field.empty()) throw parse_error(lineno, "stray quote in unquoted field");
            quoted = was_quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
            was_quoted = false;
        } else if (c == '\r' and i + 1 == line.size()) {
            // tolerate CRLF
        } else {
            if (was_quoted) throw parse_error(lineno, "characters after closing quote");
            field += c;
        }
    }
    if (quoted) throw parse_error(lineno, "unterminated quoted field");
    out.push_back(std::move(field));
    return out;
}

inline std::string quote(std::string_view s)
{
    if (s.find_first_of(",\"\n\r") == std::string_view::npos and not s.empty()) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

inline Value parse_value(std::string_view s, Kind k, std::size_t lineno)
{
    switch (k) {
        case Kind::i64: {
            std::int64_t v;
            auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc() or p != s.data() + s.size())
                throw parse_error(lineno, "'" + std::string(s) + "' is not an i64");
            return Value(v);
        }
        case Kind::f64: {
            std::string tmp(s);
            char *end = nullptr;
            double v = std::strtod(tmp.c_str(), &end);
            if (tmp.empty() or end != tmp.c_str() + tmp.size())
                throw parse_error(lineno, "'" + tmp + "' is not an f64");
            return Value(v);
        }
        case Kind::str: return Value(std::string(s));
    }
    return {};
}

inline std::string format_value(const Value &v)
{
    return v.is_string() ? quote(v.as_string()) : v.to_string();
}

/** Parses a header of `name:kind` columns. */
inline std::vector<Attribute> parse_header(std::string_view line, std::size_t lineno = 1)
{
    std::vector<Attribute> attrs;
    for (const auto &f : split(line, lineno)) {
        auto colon = f.rfind(':');
        if (colon == std::string::npos) throw parse_error(lineno, "header column '" + f + "' lacks ':kind'");
        try {
            attrs.push_back({f.substr(0, colon), parse_kind(f.substr(colon + 1))});
        } catch (const type_mismatch &e) {
            throw parse_error(lineno, e.what());
        }
    }
    return attrs;
}

inline std::string format_header(const Schema &s)
{
    std::string out;
    for (std::size_t i = 0; i != s.arity(); ++i) {
        if (i) out += ',';
        out += quote(s.attributes[i].name + ":" + std::string(kind_name(s.attributes[i].kind)));
    }
    return out;
}

inline Tuple parse_row(std::string_view line, const Schema &schema, std::size_t lineno)
{
    auto fields = split(line, lineno);
    if (fields.size() != schema.arity())
        throw parse_error(lineno, "expected " + std::to_string(schema.arity()) + " fields, got " +
                                      std::to_string(fields.size()));
    Tuple t;
    t.reserve(fields.size());
    for (std::size_t i = 0; i != fields.size(); ++i) t.push_back(parse_value(fields[i], schema.attributes[i].kind, lineno));
    return t;
}

inline std::string format_row(const Tuple &t)
{
    std::string out;
    for (std::size_t i = 0; i != t.size(); ++i) {
        if (i) out += ',';
        out += format_value(t[i]);
    }
    return out;
}

/** Streams a relation CSV: the schema first, then every row (multiplicities are repeated rows). */
template<typename OnSchema, typename OnRow>
void read(std::istream &in, const std::string &relation, OnSchema &&on_schema, OnRow &&on_row)
{
    std::string line;
    std::size_t lineno = 0;
    if (not std::getline(in, line)) throw parse_error(1, "missing header");
    ++lineno;
    Schema schema(relation, parse_header(line, lineno));
    on_schema(schema);
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() or line == "\r") continue;
        on_row(parse_row(line, schema, lineno));
    }
}

}

inline BagRelation read_relation_csv(std::istream &in, const std::string &relation)
{
    BagRelation out;
    csv::read(in, relation, [&](const Schema &s) { out = BagRelation(s); }, [&](Tuple t) { out.add(t); });
    return out;
}

inline BagRelation read_relation_csv(const std::string &path, const std::string &relation)
{
    std::ifstream in(path);
    if (not in) throw error("cannot open '" + path + "'");
    return read_relation_csv(in, relation);
}

inline void write_relation_csv(std::ostream &out, const BagRelation &rel)
{
    out << csv::format_header(rel.schema) << '\n';
    for (const auto &[t, n] : rel.rows) {
        std::string row = csv::format_row(t);
        for (std::int64_t i = 0; i != n; ++i) out << row << '\n';
    }
}

}
