#pragma once

#include <sketchd/error.hpp>

#include <bit>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>


namespace sketchd {

enum class Kind : std::uint8_t { i64, f64, str };

inline std::string_view kind_name(Kind k)
{
    switch (k) {
        case Kind::i64: return "i64";
        case Kind::f64: return "f64";
        case Kind::str: return "str";
    }
    return "?";
}

inline Kind parse_kind(std::string_view s)
{
    if (s == "i64") return Kind::i64;
    if (s == "f64") return Kind::f64;
    if (s == "str") return Kind::str;
    throw type_mismatch("unknown kind '" + std::string(s) + "'");
}

namespace detail {

inline std::uint64_t mix64(std::uint64_t x)
{
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_bytes(std::string_view s, std::uint64_t seed)
{
    std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return mix64(h);
}

}

/** A single attribute value.  Comparisons are only meaningful between values of the same kind; `operator<` is a total
 * order across kinds for use as container key, while `compare()` enforces kind agreement. */
class Value
{
    std::variant<std::int64_t, double, std::string> v_;

    public:
    Value() : v_(std::int64_t{0}) { }

    template<std::integral T>
    requires (not std::same_as<T, bool>)
    Value(T x) : v_(static_cast<std::int64_t>(x)) { }

    template<std::floating_point T>
    Value(T x) : v_(static_cast<double>(x)) { }

    Value(std::string s) : v_(std::move(s)) { }
    Value(std::string_view s) : v_(std::string(s)) { }
    Value(const char *s) : v_(std::string(s)) { }

    Kind kind() const { return static_cast<Kind>(v_.index()); }
    bool is_int() const { return v_.index() == 0; }
    bool is_float() const { return v_.index() == 1; }
    bool is_string() const { return v_.index() == 2; }

    std::int64_t as_int() const {
        if (not is_int()) throw kind_mismatch("expected i64, got " + std::string(kind_name(kind())));
        return std::get<0>(v_);
    }
    double as_float() const {
        if (not is_float()) throw kind_mismatch("expected f64, got " + std::string(kind_name(kind())));
        return std::get<1>(v_);
    }
    const std::string & as_string() const {
        if (not is_string()) throw kind_mismatch("expected str, got " + std::string(kind_name(kind())));
        return std::get<2>(v_);
    }

    /** Numeric view of an i64 or f64 value. */
    double as_number() const {
        if (is_int()) return static_cast<double>(std::get<0>(v_));
        return as_float();
    }

    friend bool operator==(const Value &a, const Value &b) {
        if (a.v_.index() != b.v_.index()) return false;
        switch (a.v_.index()) {
            case 0: return std::get<0>(a.v_) == std::get<0>(b.v_);
            case 1: return std::get<1>(a.v_) == std::get<1>(b.v_);
            default: return std::get<2>(a.v_) == std::get<2>(b.v_);
        }
    }

    /** Total order: by kind first, then by value. */
    friend bool operator<(const Value &a, const Value &b) {
        if (a.v_.index() != b.v_.index()) return a.v_.index() < b.v_.index();
        switch (a.v_.index()) {
            case 0: return std::get<0>(a.v_) < std::get<0>(b.v_);
            case 1: return std::get<1>(a.v_) < std::get<1>(b.v_);
            default: return std::get<2>(a.v_) < std::get<2>(b.v_);
        }
    }
    friend bool operator>(const Value &a, const Value &b) { return b < a; }
    friend bool operator<=(const Value &a, const Value &b) { return not (b < a); }
    friend bool operator>=(const Value &a, const Value &b) { return not (a < b); }

    std::uint64_t hash(std::uint64_t seed = 0) const {
        switch (v_.index()) {
            case 0: return detail::mix64(static_cast<std::uint64_t>(std::get<0>(v_)) ^ detail::mix64(seed));
            case 1: {
                double d = std::get<1>(v_);
                if (d == 0.0) d = 0.0; // -0.0 == 0.0
                return detail::mix64(std::bit_cast<std::uint64_t>(d) ^ detail::mix64(seed ^ 0x5bd1e995ULL));
            }
            default: return detail::hash_bytes(std::get<2>(v_), seed);
        }
    }

    std::string to_string() const {
        switch (v_.index()) {
            case 0: return std::to_string(std::get<0>(v_));
            case 1: {
                std::ostringstream os;
                os.precision(17);
                os << std::get<1>(v_);
                return os.str();
            }
            default: return std::get<2>(v_);
        }
    }

    friend std::ostream & operator<<(std::ostream &out, const Value &v) {
        if (v.is_string()) return out << '\'' << v.as_string() << '\'';
        return out << v.to_string();
    }
};

/** Three-way comparison of two values of the same kind.  Mixed kinds are a type error. */
inline int compare(const Value &a, const Value &b)
{
    if (a.kind() != b.kind())
        throw type_mismatch("cannot compare " + std::string(kind_name(a.kind())) + " with " +
                            std::string(kind_name(b.kind())));
    if (a < b) return -1;
    if (b < a) return 1;
    return 0;
}

namespace detail {

template<typename IntOp, typename FloatOp>
Value arith(const Value &a, const Value &b, const char *op, IntOp iop, FloatOp fop)
{
    if (a.kind() != b.kind() or a.is_string())
        throw type_mismatch(std::string("operator ") + op + " undefined for " + std::string(kind_name(a.kind())) +
                            " and " + std::string(kind_name(b.kind())));
    if (a.is_int()) {
        std::int64_t r;
        if (iop(a.as_int(), b.as_int(), &r))
            throw overflow_error(std::string("i64 overflow in operator ") + op);
        return Value(r);
    }
    return Value(fop(a.as_float(), b.as_float()));
}

}

inline Value add(const Value &a, const Value &b)
{
    return detail::arith(a, b, "+",
                         [](std::int64_t x, std::int64_t y, std::int64_t *r) { return __builtin_add_overflow(x, y, r); },
                         [](double x, double y) { return x + y; });
}

inline Value sub(const Value &a, const Value &b)
{
    return detail::arith(a, b, "-",
                         [](std::int64_t x, std::int64_t y, std::int64_t *r) { return __builtin_sub_overflow(x, y, r); },
                         [](double x, double y) { return x - y; });
}

inline Value mul(const Value &a, const Value &b)
{
    return detail::arith(a, b, "*",
                         [](std::int64_t x, std::int64_t y, std::int64_t *r) { return __builtin_mul_overflow(x, y, r); },
                         [](double x, double y) { return x * y; });
}

using Tuple = std::vector<Value>;

inline std::uint64_t hash_tuple(const Tuple &t, std::uint64_t seed = 0)
{
    std::uint64_t h = detail::mix64(seed ^ t.size());
    for (const auto &v : t)
        h = detail::mix64(h ^ v.hash(seed));
    return h;
}

struct TupleHash
{
    std::size_t operator()(const Tuple &t) const { return hash_tuple(t); }
};

inline std::string to_string(const Tuple &t)
{
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i != t.size(); ++i) {
        if (i) os << ", ";
        os << t[i];
    }
    os << ')';
    return os.str();
}

inline std::ostream & operator<<(std::ostream &out, const Tuple &t) { return out << to_string(t); }

}
