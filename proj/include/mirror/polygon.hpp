#pragma once

#include <optional>
#include <vector>

#include "mirror/vec.hpp"

namespace mirror {

using Polygon = std::vector<QVec>;  // counterclockwise, no repeated closing vertex

inline Rat signed_area(const Polygon& poly) {
    Rat twice = 0;
    std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) twice += cross(poly[i], poly[(i + 1) % n]);
    return twice / 2;
}

enum class Where { Inside, Boundary, Outside };

inline bool on_segment(const QVec& a, const QVec& b, const QVec& p) {
    if (cross(b - a, p - a) != 0) return false;
    Rat t = dot(p - a, b - a);
    return sgn(t) >= 0 && t <= dot(b - a, b - a);
}

// Exact point location in a simple CCW polygon (crossing count with boundary test).
inline Where locate(const Polygon& poly, const QVec& p) {
    std::size_t n = poly.size();
    bool in = false;
    for (std::size_t i = 0; i < n; ++i) {
        const QVec& a = poly[i];
        const QVec& b = poly[(i + 1) % n];
        if (on_segment(a, b, p)) return Where::Boundary;
        bool a_below = a.y <= p.y, b_below = b.y <= p.y;
        if (a_below != b_below) {
            // sign of the crossing of edge (a,b) with the horizontal ray from p
            int side = sgn(cross(b - a, p - a));
            if (b_below ? side < 0 : side > 0) in = !in;
        }
    }
    return in ? Where::Inside : Where::Outside;
}

inline bool is_ccw_convex(const Polygon& poly, bool strict = true) {
    std::size_t n = poly.size();
    if (n < 3) return false;
    for (std::size_t i = 0; i < n; ++i) {
        Rat c = cross(poly[(i + 1) % n] - poly[i], poly[(i + 2) % n] - poly[(i + 1) % n]);
        if (strict ? sgn(c) <= 0 : sgn(c) < 0) return false;
    }
    return true;
}

inline bool segments_properly_intersect(const QVec& a, const QVec& b, const QVec& c, const QVec& d) {
    int d1 = sgn(cross(b - a, c - a));
    int d2 = sgn(cross(b - a, d - a));
    int d3 = sgn(cross(d - c, a - c));
    int d4 = sgn(cross(d - c, b - c));
    return d1 * d2 < 0 && d3 * d4 < 0;
}

inline bool is_simple(const Polygon& poly) {
    std::size_t n = poly.size();
    if (n < 3) return false;
    for (std::size_t i = 0; i < n; ++i) {
        if (poly[i] == poly[(i + 1) % n]) return false;
        for (std::size_t j = i + 1; j < n; ++j) {
            const QVec &a = poly[i], &b = poly[(i + 1) % n];
            const QVec &c = poly[j], &d = poly[(j + 1) % n];
            if (segments_properly_intersect(a, b, c, d)) return false;
            bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
            if (!adjacent) {
                if (on_segment(a, b, c) || on_segment(a, b, d) || on_segment(c, d, a) ||
                    on_segment(c, d, b))
                    return false;
            }
        }
    }
    return true;
}

inline Rat polygon_area(const Polygon& poly) {
    if (!is_simple(poly)) fail("NotSimple", "polygon is self-intersecting or degenerate");
    Rat a = signed_area(poly);
    if (sgn(a) <= 0) fail("NotSimple", "polygon is not counterclockwise");
    return a;
}

// Intersection parameter t on line p + t*d with line through q, direction e.
inline std::optional<Rat> line_hit(const QVec& p, const QVec& d, const QVec& q, const QVec& e) {
    Rat denom = cross(d, e);
    if (denom == 0) return std::nullopt;
    return cross(q - p, e) / denom;
}

struct SegHit {
    enum Kind { None, Point, Overlap } kind = None;
    QVec at;        // for Point
    QVec from, to;  // for Overlap
};

inline SegHit seg_intersect(const QVec& a, const QVec& b, const QVec& c, const QVec& d) {
    QVec u = b - a, v = d - c;
    Rat denom = cross(u, v);
    if (denom == 0) {
        if (cross(c - a, u) != 0) return {};  // parallel, distinct lines
        // collinear: overlap in parameters along u
        Rat uu = dot(u, u);
        Rat t0 = dot(c - a, u) / uu, t1 = dot(d - a, u) / uu;
        if (t0 > t1) std::swap(t0, t1);
        Rat lo = t0 < 0 ? Rat(0) : t0, hi = t1 > 1 ? Rat(1) : t1;
        if (lo > hi) return {};
        QVec p = a + lo * u, q = a + hi * u;
        if (p == q) return {SegHit::Point, p, {}, {}};
        return {SegHit::Overlap, {}, p, q};
    }
    Rat t = cross(c - a, v) / denom;
    Rat s = cross(c - a, u) / denom;
    if (sgn(t) < 0 || t > 1 || sgn(s) < 0 || s > 1) return {};
    return {SegHit::Point, a + t * u, {}, {}};
}

// All lattice points of a bounded region given by exact membership, scanned over the bbox.
template <typename Pred>
inline std::vector<IVec> lattice_points_where(const Polygon& bbox_of, Pred&& keep) {
    Rat xmin = bbox_of[0].x, xmax = xmin, ymin = bbox_of[0].y, ymax = ymin;
    for (const auto& p : bbox_of) {
        if (p.x < xmin) xmin = p.x;
        if (p.x > xmax) xmax = p.x;
        if (p.y < ymin) ymin = p.y;
        if (p.y > ymax) ymax = p.y;
    }
    std::vector<IVec> out;
    for (Int x = ceil_rat(xmin); x <= floor_rat(xmax); ++x)
        for (Int y = ceil_rat(ymin); y <= floor_rat(ymax); ++y)
            if (keep(IVec{x, y})) out.push_back({x, y});
    return out;
}

inline std::vector<IVec> lattice_points(const Polygon& poly) {
    return lattice_points_where(poly, [&](const IVec& p) { return locate(poly, QVec(p)) != Where::Outside; });
}

inline std::size_t boundary_lattice_count(const Polygon& poly) {
    std::size_t n = poly.size(), count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        QVec d = poly[(i + 1) % n] - poly[i];
        if (is_integral(poly[i]) && is_integral(d))
            count += static_cast<std::size_t>(content(to_ivec(d)));
        else
            fail("NotIntegral", "boundary lattice count needs integral vertices");
    }
    return count;
}

}  // namespace mirror
