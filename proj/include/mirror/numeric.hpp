#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <optional>
#include <stdexcept>
#include <string>

namespace mirror {

using Int = boost::multiprecision::cpp_int;
using Rat = boost::multiprecision::cpp_rational;

struct MirrorError : std::runtime_error {
    std::string code;
    MirrorError(std::string code_, const std::string& what_)
        : std::runtime_error(code_ + ": " + what_), code(std::move(code_)) {}
};

[[noreturn]] inline void fail(const std::string& code, const std::string& what) {
    throw MirrorError(code, what);
}

inline Int num(const Rat& q) { return boost::multiprecision::numerator(q); }
inline Int den(const Rat& q) { return boost::multiprecision::denominator(q); }

inline int sgn(const Int& x) { return x.sign(); }
inline int sgn(const Rat& q) { return num(q).sign(); }

inline Int gcd(const Int& a, const Int& b) { return boost::multiprecision::gcd(a, b); }

inline Int floor_rat(const Rat& q) {
    Int n = num(q), d = den(q);
    Int t = n / d;
    if (n < 0 && t * d != n) --t;
    return t;
}

inline Int ceil_rat(const Rat& q) { return -floor_rat(-q); }

inline bool is_integer(const Rat& q) { return den(q) == 1; }

inline std::string format_int(const Int& n) { return n.str(); }

// Rationals travel through JSON as "num" or "num/den" strings.
inline std::string format_rat(const Rat& q) {
    if (is_integer(q)) return num(q).str();
    return num(q).str() + "/" + den(q).str();
}

inline std::optional<Int> parse_int(const std::string& s) {
    if (s.empty()) return std::nullopt;
    std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
    if (i == s.size()) return std::nullopt;
    for (std::size_t j = i; j < s.size(); ++j)
        if (s[j] < '0' || s[j] > '9') return std::nullopt;
    return Int(s);
}

inline std::optional<Rat> parse_rat(const std::string& s) {
    auto slash = s.find('/');
    if (slash == std::string::npos) {
        auto n = parse_int(s);
        if (!n) return std::nullopt;
        return Rat(*n);
    }
    auto n = parse_int(s.substr(0, slash));
    auto d = parse_int(s.substr(slash + 1));
    if (!n || !d || *d == 0) return std::nullopt;
    return Rat(*n, *d);
}

}  // namespace mirror
