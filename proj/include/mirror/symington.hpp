#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mirror/model.hpp"

namespace mirror {

// One triangle cut: base on the boundary, apex at lattice height m over it,
// the two seam edges glued by an integral affine map fixing the apex.
struct CutData {
    int edge = 0;
    Int m;              // base length = apex height
    IVec base0, base1;  // base endpoints, counterclockwise along the edge
    IVec apex;
    Int d;              // gcd of the apex-to-base vectors' contents
    IVec invariant_dir; // primitive, parallel to the cut edge
    IAff glue;          // seam [apex,base0] -> seam [apex,base1], fixes apex
    Mat2 monodromy;     // loop holonomy, conjugate to [[1,1],[0,1]] in SL(2,Z)
};

struct SymingtonPolytope {
    ToricModelInput model;
    MomentumPolygon mp;
    std::vector<CutData> cuts;
    Rat area;  // of P = P-bar minus the cut triangles
    Int Lsq;   // self-intersection of the polarization, 2*Area(P-bar)
};

inline std::vector<CutData> place_cut_triangles(const ToricModelInput& model) {
    validate_model(model);
    MomentumPolygon mp = build_momentum_polygon(model);
    std::vector<CutData> out;
    for (const auto& cut : model.cuts) {
        const ModelEdge& e = mp.edges[cut.edge];
        CutData cd;
        cd.edge = cut.edge;
        cd.m = cut.size;
        cd.base0 = e.from + cut.offset * e.dir;
        cd.base1 = cd.base0 + cut.size * e.dir;
        cd.invariant_dir = e.dir;
        // The apex lives on the slice of conv(base, origin) at lattice distance m
        // from the edge, i.e. the base scaled toward the origin by (c-m)/c.
        Rat t = Rat(e.c - cut.size, e.c);
        QVec lo = t * QVec(cd.base0);
        Rat len = t * Rat(cut.size);  // slice length in units of e.dir
        std::optional<IVec> apex;
        {
            // scan the coordinate where dir is nonzero; candidates lo + s*dir
            bool use_x = e.dir.x != 0;
            const Rat& lo_c = use_x ? lo.x : lo.y;
            Int dir_c = use_x ? e.dir.x : e.dir.y;
            Rat end_c = lo_c + len * dir_c;
            Rat a = lo_c < end_c ? lo_c : end_c, b = lo_c < end_c ? end_c : lo_c;
            for (Int n = ceil_rat(a); n <= floor_rat(b); ++n) {
                Rat s = (Rat(n) - lo_c) / dir_c;
                QVec q = lo + s * QVec(e.dir);
                if (is_integral(q)) {
                    IVec cand = to_ivec(q);
                    if (!apex || cand < *apex) apex = cand;
                }
            }
        }
        if (!apex) fail("NoApex", "no integral apex for cut on edge " + std::to_string(cut.edge));
        cd.apex = *apex;
        IVec v0 = cd.base0 - cd.apex, v1 = cd.base1 - cd.apex;
        cd.d = gcd(content(v0), content(v1));
        // glue maps apex + s*v0 to apex + s*v1; its linear part fixes the edge
        // direction and shears by -1 across it, so the opposite loop holonomy is
        // the standard focus-focus matrix.
        Mat2 M = shear_fixing(e.dir, -1);
        if (M.apply(v0) != v1) fail("Internal", "seam gluing does not match");
        cd.glue = IAff{M, cd.apex - M.apply(cd.apex)};
        cd.monodromy = shear_fixing(e.dir, 1);
        out.push_back(cd);
    }
    for (std::size_t i = 0; i < out.size(); ++i)
        for (std::size_t j = i + 1; j < out.size(); ++j)
            if (out[i].apex == out[j].apex)
                fail("ApexCollision", "cuts share the apex " + str(out[i].apex));
    return out;
}

// Boundary of the chart: the polygon boundary with each cut base replaced by
// the detour base0 -> apex -> base1.  May touch itself when an apex lies on
// the boundary, so only the signed area is meaningful in general.
inline Polygon chart_boundary(const MomentumPolygon& mp, const std::vector<CutData>& cuts) {
    Polygon out;
    for (std::size_t i = 0; i < mp.edges.size(); ++i) {
        const ModelEdge& e = mp.edges[i];
        out.push_back(QVec(e.from));
        std::vector<const CutData*> here;
        for (const auto& c : cuts)
            if (c.edge == static_cast<int>(i)) here.push_back(&c);
        std::sort(here.begin(), here.end(), [&](const CutData* a, const CutData* b) {
            return dot(a->base0 - e.from, e.dir) < dot(b->base0 - e.from, e.dir);
        });
        for (const CutData* c : here) {
            out.push_back(QVec(c->base0));
            out.push_back(QVec(c->apex));
            out.push_back(QVec(c->base1));
        }
    }
    // drop duplicate consecutive points (cut base meeting a vertex)
    Polygon dedup;
    for (const auto& p : out)
        if (dedup.empty() || dedup.back() != p) dedup.push_back(p);
    if (dedup.size() > 1 && dedup.front() == dedup.back()) dedup.pop_back();
    return dedup;
}

inline SymingtonPolytope build_symington(const ToricModelInput& model) {
    SymingtonPolytope P;
    P.model = model;
    P.mp = build_momentum_polygon(model);
    P.cuts = place_cut_triangles(model);
    Rat bar_area = polygon_area(P.mp.poly);
    P.Lsq = num(2 * bar_area);
    if (2 * bar_area != P.Lsq) fail("Internal", "momentum polygon area is not half-integral");
    Rat cut_area = 0;
    for (const auto& c : P.cuts) cut_area += Rat(c.m * c.m, 2);
    P.area = bar_area - cut_area;
    Rat by_chart = signed_area(chart_boundary(P.mp, P.cuts));
    if (by_chart != P.area) fail("AreaMismatch", "chart shoelace disagrees with the area identity");
    if (sgn(P.area) <= 0) fail("AreaMismatch", "cut triangles exhaust the polygon");
    return P;
}

inline int charge(const ToricModelInput& model) { return static_cast<int>(model.cuts.size()); }

// ---- chart membership and straight-line tracing ----

inline const ModelEdge* boundary_edge_at(const SymingtonPolytope& P, const QVec& p) {
    for (const auto& e : P.mp.edges)
        if (on_segment(QVec(e.from), QVec(e.to), p)) return &e;
    return nullptr;
}

// Material points: inside the polygon, outside every open cut triangle, and
// not in the removed open base segments.
inline bool material_point(const SymingtonPolytope& P, const QVec& p) {
    Where w = locate(P.mp.poly, p);
    if (w == Where::Outside) return false;
    for (const auto& c : P.cuts) {
        Polygon tri{QVec(c.apex), QVec(c.base0), QVec(c.base1)};
        Where t = locate(tri, p);
        if (t == Where::Inside) return false;
        if (t == Where::Boundary && on_segment(QVec(c.base0), QVec(c.base1), p) &&
            p != QVec(c.base0) && p != QVec(c.base1))
            return false;
    }
    return true;
}

struct TraceStop {
    enum Reason { Boundary, SingularPoint, Budget } reason = Boundary;
    QVec at;
};

struct TracePiece {
    QVec from, to;
    int seam = -1;      // cut index crossed at `to` (-1 when the trace stops there)
    bool forward = true;  // true: crossed seam a->b (glue applied), false: b->a
};

struct TraceResult {
    std::vector<TracePiece> pieces;
    TraceStop stop;
    IAff holonomy;  // total transform applied to directions along the trace
};

// Walk a straight line through the chart from `start` along `dir`, crossing
// seams by the gluing maps, until the boundary of P is reached.
inline TraceResult trace_line(const SymingtonPolytope& P, QVec pos, QVec dir, int max_cross = 256) {
    TraceResult res;
    res.holonomy = IAff{};
    if (is_zero(dir)) fail("ZeroVector", "trace direction");
    for (int step = 0;; ++step) {
        if (step >= max_cross) {
            res.stop = {TraceStop::Budget, pos};
            return res;
        }
        // immediate exit: on the outer boundary pointing outward
        bool exits = false;
        for (const auto& e : P.mp.edges) {
            if (!on_segment(QVec(e.from), QVec(e.to), pos)) continue;
            Rat side = dot(dir, QVec(e.ray));
            if (side < 0) exits = true;
        }
        if (exits) {
            res.stop = {TraceStop::Boundary, pos};
            return res;
        }
        struct Event {
            Rat t;
            int kind;  // 0 outer boundary, 1 base, 2 seam, 3 apex point
            int cut;
            bool forward;
        };
        std::optional<Event> best;
        auto consider = [&](const Event& ev) {
            if (sgn(ev.t) <= 0) return;
            if (!best || ev.t < best->t ||
                (ev.t == best->t && ev.kind < best->kind))
                best = ev;
        };
        auto ray_hits_segment = [&](const QVec& a, const QVec& b) -> std::vector<Rat> {
            std::vector<Rat> ts;
            QVec seg = b - a;
            Rat denom = cross(dir, seg);
            if (denom == 0) {
                if (cross(a - pos, dir) != 0) return ts;  // parallel, off the line
                Rat dd = dot(dir, dir);
                Rat ta = dot(a - pos, dir) / dd, tb = dot(b - pos, dir) / dd;
                if (ta > tb) std::swap(ta, tb);
                if (ta > 0) ts.push_back(ta);
                if (tb > 0) ts.push_back(tb);
                return ts;
            }
            Rat t = cross(a - pos, seg) / denom;
            Rat s = cross(a - pos, dir) / denom;
            if (sgn(s) >= 0 && s <= 1 && sgn(t) > 0) ts.push_back(t);
            return ts;
        };
        for (const auto& e : P.mp.edges)
            for (const Rat& t : ray_hits_segment(QVec(e.from), QVec(e.to)))
                consider({t, 0, -1, true});
        for (std::size_t ci = 0; ci < P.cuts.size(); ++ci) {
            const CutData& c = P.cuts[ci];
            for (const Rat& t : ray_hits_segment(QVec(c.base0), QVec(c.base1)))
                consider({t, 1, static_cast<int>(ci), true});
            for (const Rat& t : ray_hits_segment(QVec(c.apex), QVec(c.base0)))
                consider({t, 2, static_cast<int>(ci), true});
            for (const Rat& t : ray_hits_segment(QVec(c.apex), QVec(c.base1)))
                consider({t, 2, static_cast<int>(ci), false});
        }
        if (!best) fail("Internal", "trace escaped the chart at " + str(pos));
        QVec hit = pos + best->t * dir;
        QVec mid = pos + (best->t / 2) * dir;
        if (!material_point(P, mid))
            fail("Internal", "trace passed through removed material at " + str(mid));
        if (best->kind == 2) {
            const CutData& c = P.cuts[best->cut];
            if (hit == QVec(c.apex)) {
                res.pieces.push_back({pos, hit, -1, true});
                res.stop = {TraceStop::SingularPoint, hit};
                return res;
            }
            if (hit == QVec(c.base0) || hit == QVec(c.base1)) {
                // seam endpoint on the outer boundary
                res.pieces.push_back({pos, hit, -1, true});
                res.stop = {TraceStop::Boundary, hit};
                return res;
            }
            IAff g = best->forward ? c.glue : c.glue.inverse();
            res.pieces.push_back({pos, hit, best->cut, best->forward});
            pos = g.apply(hit);
            dir = g.M.apply(dir);
            res.holonomy = g * res.holonomy;
            continue;
        }
        res.pieces.push_back({pos, hit, -1, true});
        res.stop = {TraceStop::Boundary, hit};
        return res;
    }
}

struct InvariantSegment {
    std::vector<TracePiece> forward, backward;  // along +dir and -dir
    Rat length;  // total, in lattice units of the invariant direction
};

inline InvariantSegment invariant_segment(const SymingtonPolytope& P, const CutData& sing) {
    InvariantSegment seg;
    Rat unit = 0;
    for (int side = 0; side < 2; ++side) {
        QVec dir = QVec(side == 0 ? sing.invariant_dir : -sing.invariant_dir);
        TraceResult tr = trace_line(P, QVec(sing.apex), dir);
        if (tr.stop.reason == TraceStop::Budget)
            fail("MonodromyLineBlocked", "invariant line does not terminate");
        auto& out = side == 0 ? seg.forward : seg.backward;
        out = tr.pieces;
        for (const auto& piece : tr.pieces) {
            QVec delta = piece.to - piece.from;
            if (is_zero(delta)) continue;
            IVec pd = primitive_dir(delta);
            unit += pd.x != 0 ? delta.x / Rat(pd.x) : delta.y / Rat(pd.y);
        }
    }
    seg.length = unit;
    if (sgn(seg.length) <= 0)
        fail("MonodromyLineBlocked", "invariant line meets the chart in a single point");
    return seg;
}

}  // namespace mirror
