#pragma once

#include <optional>
#include <string>

#include "mirror/numeric.hpp"

namespace mirror {

// Integer lattice vector / point in M = Z^2.
struct IVec {
    Int x{}, y{};

    friend IVec operator+(const IVec& a, const IVec& b) { return {a.x + b.x, a.y + b.y}; }
    friend IVec operator-(const IVec& a, const IVec& b) { return {a.x - b.x, a.y - b.y}; }
    friend IVec operator-(const IVec& a) { return {-a.x, -a.y}; }
    friend IVec operator*(const Int& k, const IVec& a) { return {k * a.x, k * a.y}; }
    friend bool operator==(const IVec& a, const IVec& b) = default;
    friend bool operator<(const IVec& a, const IVec& b) {  // lexicographic
        return a.x != b.x ? a.x < b.x : a.y < b.y;
    }
};

// Rational point of the chart.
struct QVec {
    Rat x{}, y{};

    QVec() = default;
    QVec(Rat x_, Rat y_) : x(std::move(x_)), y(std::move(y_)) {}
    QVec(const IVec& v) : x(v.x), y(v.y) {}

    friend QVec operator+(const QVec& a, const QVec& b) { return {a.x + b.x, a.y + b.y}; }
    friend QVec operator-(const QVec& a, const QVec& b) { return {a.x - b.x, a.y - b.y}; }
    friend QVec operator-(const QVec& a) { return {-a.x, -a.y}; }
    friend QVec operator*(const Rat& k, const QVec& a) { return {k * a.x, k * a.y}; }
    friend bool operator==(const QVec& a, const QVec& b) = default;
    friend bool operator<(const QVec& a, const QVec& b) {  // lexicographic
        return a.x != b.x ? a.x < b.x : a.y < b.y;
    }
};

inline Int cross(const IVec& a, const IVec& b) { return a.x * b.y - a.y * b.x; }
inline Int dot(const IVec& a, const IVec& b) { return a.x * b.x + a.y * b.y; }
inline Rat cross(const QVec& a, const QVec& b) { return a.x * b.y - a.y * b.x; }
inline Rat dot(const QVec& a, const QVec& b) { return a.x * b.x + a.y * b.y; }

inline IVec rot90(const IVec& v) { return {-v.y, v.x}; }

inline bool is_zero(const IVec& v) { return v.x == 0 && v.y == 0; }
inline bool is_zero(const QVec& v) { return v.x == 0 && v.y == 0; }

inline bool is_integral(const QVec& v) { return is_integer(v.x) && is_integer(v.y); }

inline IVec to_ivec(const QVec& v) {
    if (!is_integral(v)) fail("NotIntegral", "point is not a lattice point");
    return {num(v.x), num(v.y)};
}

inline Int content(const IVec& v) {
    if (is_zero(v)) fail("ZeroVector", "content of zero vector");
    return gcd(abs(v.x), abs(v.y));
}

inline IVec primitive(const IVec& v) {
    Int g = content(v);
    return {v.x / g, v.y / g};
}

// Primitive integer direction of a rational vector.
inline IVec primitive_dir(const QVec& v) {
    if (is_zero(v)) fail("ZeroVector", "direction of zero vector");
    Int scale = den(v.x) * den(v.y);
    IVec w{num(v.x * scale), num(v.y * scale)};
    return primitive(w);
}

inline Int lattice_length(const IVec& a, const IVec& b) {
    if (a == b) fail("DegenerateSegment", "lattice_length of a point");
    return content(b - a);
}

inline std::string str(const IVec& v) { return "(" + v.x.str() + "," + v.y.str() + ")"; }
inline std::string str(const QVec& v) { return "(" + format_rat(v.x) + "," + format_rat(v.y) + ")"; }

// 2x2 integer matrix acting by m |-> (a*x+b*y, c*x+d*y).
struct Mat2 {
    Int a{1}, b{0}, c{0}, d{1};

    Int det() const { return a * d - b * c; }

    IVec apply(const IVec& v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }
    QVec apply(const QVec& v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }

    friend Mat2 operator*(const Mat2& m, const Mat2& n) {
        return {m.a * n.a + m.b * n.c, m.a * n.b + m.b * n.d,
                m.c * n.a + m.d * n.c, m.c * n.b + m.d * n.d};
    }
    friend bool operator==(const Mat2& m, const Mat2& n) = default;

    // Exact inverse; only valid for det = +-1.
    Mat2 inverse() const {
        Int D = det();
        if (D != 1 && D != -1) fail("NotUnimodular", "inverse of non-unimodular matrix");
        return {d / D, -b / D, -c / D, a / D};
    }

    Int trace() const { return a + d; }
};

inline Mat2 identity_mat() { return Mat2{}; }

// The unique T in SL(2,Z) with T(f_from) = f_to and T(e_fix) = e_fix,
// i.e. T = [f_to | e_fix] * [f_from | e_fix]^{-1} on column bases.
inline Mat2 solve_unimodular(const IVec& f_from, const IVec& f_to, const IVec& e_fix) {
    Int D = cross(f_from, e_fix);
    if (D == 0) fail("NoUnimodularSolution", "(f_from, e_fix) is not a basis");
    // adj([f_from | e_fix]) has rows (e_fix.y, -e_fix.x), (-f_from.y, f_from.x).
    Mat2 lhs{f_to.x, e_fix.x, f_to.y, e_fix.y};
    Mat2 adj{e_fix.y, -e_fix.x, -f_from.y, f_from.x};
    Mat2 prod = lhs * adj;
    Int entries[4] = {prod.a, prod.b, prod.c, prod.d};
    for (auto& e : entries) {
        if (e % D != 0) fail("NoUnimodularSolution", "solution is not integral");
    }
    Mat2 T{prod.a / D, prod.b / D, prod.c / D, prod.d / D};
    if (T.det() != 1) fail("NoUnimodularSolution", "solution has determinant != 1");
    return T;
}

// Affine map x |-> M x + t with integer linear part.
struct IAff {
    Mat2 M;
    IVec t{};

    QVec apply(const QVec& p) const { return M.apply(p) + QVec(t); }
    IVec apply(const IVec& p) const { return M.apply(p) + t; }

    friend IAff operator*(const IAff& f, const IAff& g) {
        // (f*g)(x) = f(g(x))
        return {f.M * g.M, f.M.apply(g.t) + f.t};
    }
    friend bool operator==(const IAff& f, const IAff& g) = default;

    IAff inverse() const {
        Mat2 Mi = M.inverse();
        return {Mi, -Mi.apply(t)};
    }
};

// Shear fixing the primitive direction u: w |-> w + s * det(u, w) * u.
// Conjugate to [[1,1],[0,1]] for s = +-1.
inline Mat2 shear_fixing(const IVec& u, const Int& s) {
    return {1 - s * u.x * u.y, s * u.x * u.x, -s * u.y * u.y, 1 + s * u.x * u.y};
}

}  // namespace mirror
