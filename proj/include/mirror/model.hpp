#pragma once

#include <algorithm>
#include <vector>

#include "mirror/polygon.hpp"

namespace mirror {

struct Cut {
    int edge = 0;  // index into rays
    Int size;      // m_ij >= 1
    Int offset;    // lattice offset of the base along the edge, counterclockwise
};

// Fan rays of the toric model, polarization coefficients, and triangle cuts.
struct ToricModelInput {
    std::vector<IVec> rays;
    std::vector<Int> coefficients;
    std::vector<Cut> cuts;
};

struct ModelEdge {
    IVec ray;      // inward normal v_i, primitive
    Int c;         // edge lies on <x, v_i> = -c
    IVec from, to; // endpoints, counterclockwise
    IVec dir;      // primitive direction from -> to
    Int length;    // lattice length
};

struct MomentumPolygon {
    std::vector<ModelEdge> edges;
    Polygon poly;  // CCW vertex list, poly[i] = edges[i].to
};

inline void validate_fan(const ToricModelInput& m) {
    std::size_t n = m.rays.size();
    if (n < 3) fail("BadFan", "need at least three rays");
    if (m.coefficients.size() != n) fail("BadCoefficients", "one coefficient per ray required");
    for (const auto& c : m.coefficients)
        if (c < 0) fail("BadCoefficients", "coefficients must be nonnegative");
    for (const auto& r : m.rays) {
        if (is_zero(r)) fail("BadFan", "zero ray");
        if (content(r) != 1) fail("BadFan", "ray " + str(r) + " is not primitive");
    }
    for (std::size_t i = 0; i < n; ++i) {
        // complete smooth fan: consecutive rays form positively oriented bases
        if (cross(m.rays[i], m.rays[(i + 1) % n]) != 1)
            fail("BadFan", "rays must be counterclockwise with unimodular consecutive pairs");
    }
}

// Intersect the half-planes <x, v_i> >= -c_i.  Edge i lies on the i-th line;
// the distinguished central point is the origin.
inline MomentumPolygon build_momentum_polygon(const ToricModelInput& m) {
    validate_fan(m);
    std::size_t n = m.rays.size();
    std::vector<IVec> corner(n);  // corner[i] = line_i /\ line_{i+1}
    for (std::size_t i = 0; i < n; ++i) {
        const IVec &u = m.rays[i], &v = m.rays[(i + 1) % n];
        const Int &cu = m.coefficients[i], &cv = m.coefficients[(i + 1) % n];
        // solve <x,u> = -cu, <x,v> = -cv with det(u,v) = 1
        corner[i] = {-cu * v.y + cv * u.y, cu * v.x - cv * u.x};
    }
    MomentumPolygon out;
    for (std::size_t i = 0; i < n; ++i) {
        ModelEdge e;
        e.ray = m.rays[i];
        e.c = m.coefficients[i];
        e.from = corner[(i + n - 1) % n];
        e.to = corner[i];
        if (e.from == e.to) fail("NotAmple", "edge " + std::to_string(i) + " has length zero");
        IVec d = e.to - e.from;
        e.length = content(d);
        e.dir = primitive(d);
        if (e.dir != IVec{e.ray.y, -e.ray.x})
            fail("NotAmple", "edge " + std::to_string(i) + " is reversed");
        out.edges.push_back(e);
        out.poly.push_back(QVec(e.to));
    }
    for (const auto& ed : out.edges)
        for (std::size_t j = 0; j < n; ++j)
            if (dot(ed.to, m.rays[j]) < -m.coefficients[j])
                fail("NotAmple", "vertex " + str(ed.to) + " violates constraint " + std::to_string(j));
    if (!is_ccw_convex(out.poly, false)) fail("NotAmple", "constraints do not bound a convex polygon");
    return out;
}

inline void validate_model(const ToricModelInput& m) {
    MomentumPolygon mp = build_momentum_polygon(m);
    // cuts: within their edge, not exceeding the polarization, pairwise non-overlapping
    std::vector<std::vector<std::pair<Int, Int>>> spans(m.rays.size());
    for (const auto& cut : m.cuts) {
        if (cut.edge < 0 || static_cast<std::size_t>(cut.edge) >= m.rays.size())
            fail("BadCut", "cut edge index out of range");
        if (cut.size < 1) fail("BadCut", "cut size must be positive");
        if (cut.offset < 0) fail("BadCut", "cut offset must be nonnegative");
        if (cut.size > m.coefficients[cut.edge])
            fail("BadCut", "cut size exceeds the edge coefficient");
        if (cut.offset + cut.size > mp.edges[cut.edge].length)
            fail("BadCut", "cut base leaves the edge");
        spans[cut.edge].push_back({cut.offset, cut.offset + cut.size});
    }
    for (auto& sp : spans) {
        std::sort(sp.begin(), sp.end());
        for (std::size_t i = 1; i < sp.size(); ++i)
            if (sp[i].first < sp[i - 1].second)
                fail("Overlap", "cut bases overlap on a common edge");
    }
}

}  // namespace mirror
