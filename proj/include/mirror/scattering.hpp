#pragma once

#include <cstdlib>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mirror/classes.hpp"

namespace mirror {

// Exponent vector over the class labels of a ClassBasis.
using ClassVec = std::vector<Int>;

inline ClassVec zero_class(int n) { return ClassVec(n, Int(0)); }

inline ClassVec unit_class(int n, int idx) {
    ClassVec v(n, Int(0));
    v[idx] = 1;
    return v;
}

inline ClassVec cv_add(const ClassVec& a, const ClassVec& b) {
    ClassVec r = a;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += b[i];
    return r;
}

inline ClassVec cv_sub(const ClassVec& a, const ClassVec& b) {
    ClassVec r = a;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
    return r;
}

inline ClassVec cv_scale(const Int& k, const ClassVec& a) {
    ClassVec r = a;
    for (auto& x : r) x *= k;
    return r;
}

inline bool cv_nonneg(const ClassVec& a) {
    for (const auto& x : a)
        if (x < 0) return false;
    return true;
}

// One monomial of a wall function: coeff * t^beta * z^{ell * mdir}.
struct WallTerm {
    Int ell{1};
    ClassVec beta;
    friend bool operator<(const WallTerm& a, const WallTerm& b) {
        if (a.ell != b.ell) return a.ell < b.ell;
        return a.beta < b.beta;
    }
    friend bool operator==(const WallTerm&, const WallTerm&) = default;
};

// Nonconstant part of a wall function; the constant term 1 is implicit.
using WallFn = std::map<WallTerm, Rat>;

struct Wall {
    QVec a, b;       // support piece; a is the end toward the birth point
    IVec mdir;       // primitive, pointing from the support back toward the birth point
    WallFn f;        // presentation transported to this piece
    int group = -1;  // pieces of one wall share a group
    int on_edge = -1;     // decomposition edge carrying the piece, if any
    int cell = -1;        // material face holding the piece otherwise
    int origin_cut = -1;  // for initial walls, the cut that emitted them
    QVec origin;          // birth point of the group, in the chart where it was born
    ClassVec carry;       // class shift per unit of ell picked up between origin and this piece

    bool degenerate() const { return a == b; }
};

struct ScatteringDiagram {
    int order = 0;
    ClassBasis basis;
    int exc_begin = 0;  // labels >= exc_begin carry the truncation degree
    std::vector<Wall> walls;
    int groups = 0;
    bool has_model = false;
    SymingtonPolytope poly;
    PolyDecomp decomp;
    DualComplex dual;
    std::vector<std::vector<Int>> pairing;  // node-by-label degrees; empty = free labels
    Polygon outer;                          // momentum polygon boundary
    std::map<IVec, int> vert_id;
    std::vector<std::vector<int>> vert_edges;       // vertex -> incident decomposition edges
    std::map<std::pair<QVec, IVec>, int> ray_groups;  // (birth point, mdir) -> group

    int labels() const { return basis.size(); }
    int kink_of_edge(int decomp_edge) const {
        int de = dual.dual_edge_of[decomp_edge];
        return de < 0 ? -1 : basis.label_of_dual_edge[de];
    }
};

// Classes are compared through their degrees on the component divisors; for
// hand-built diagrams without a model the labels are free.
inline ClassVec class_image(const ScatteringDiagram& S, const ClassVec& beta) {
    if (S.pairing.empty()) return beta;
    ClassVec img(S.pairing.size(), Int(0));
    for (std::size_t v = 0; v < S.pairing.size(); ++v)
        for (std::size_t l = 0; l < beta.size(); ++l)
            if (beta[l] != 0) img[v] += S.pairing[v][l] * beta[l];
    return img;
}

// Truncation degree of a class exponent.  Kink transport only moves the
// double-curve entries, so counting the labels from exc_begin up gives a
// degree that is stable across transported presentations of the same term.
inline Int truncation_degree(const ScatteringDiagram& S, const ClassVec& beta) {
    Int d = 0;
    for (std::size_t l = S.exc_begin; l < beta.size(); ++l) d += beta[l];
    return d;
}

struct AutoTerm {
    IVec m;
    ClassVec beta;
    Rat c;
};

struct JointRef {
    QVec pos;
    int node = -1;  // dual node for joints at decomposition vertices
    friend bool operator<(const JointRef& a, const JointRef& b) {
        if (!(a.pos == b.pos)) return a.pos < b.pos;
        return a.node < b.node;
    }
    friend bool operator==(const JointRef&, const JointRef&) = default;
};

namespace detail {

struct Mon {
    IVec m;
    ClassVec beta;
    friend bool operator<(const Mon& a, const Mon& b) {
        if (!(a.m == b.m)) return a.m < b.m;
        return a.beta < b.beta;
    }
};

using Series = std::map<Mon, Rat>;

inline void series_add(Series& s, const Mon& key, const Rat& c) {
    if (c == 0) return;
    auto [it, fresh] = s.try_emplace(key, c);
    if (!fresh) {
        it->second += c;
        if (it->second == 0) s.erase(it);
    }
}

// One spoke of a loop around a joint, in the joint frame.
struct Spoke {
    IVec dir;       // away from the joint, primitive
    int kink = -1;  // class label of the crossed double curve, if any
    std::vector<std::pair<IVec, const WallFn*>> fns;  // (monomial direction, wall function)
};

// Product of (1 + f_w) over the spoke's walls, constant term included.
inline Series spoke_poly(const ScatteringDiagram& S, const Spoke& sp, const Int& cap) {
    Series g;
    g[{IVec{0, 0}, zero_class(S.labels())}] = 1;
    for (const auto& [mdir, fn] : sp.fns) {
        Series next;
        for (const auto& [key, c] : g) {
            series_add(next, key, c);
            for (const auto& [wt, wc] : *fn) {
                Mon k2{key.m + wt.ell * mdir, cv_add(key.beta, wt.beta)};
                if (truncation_degree(S, k2.beta) > cap) continue;
                series_add(next, k2, c * wc);
            }
        }
        g = std::move(next);
    }
    return g;
}

// Apply the crossing automorphism of one spoke to a series: each monomial z^m
// picks up (t^kink * prod f_w)^{<n, m>} with n the spoke direction rotated to
// point into the sector the counterclockwise loop is coming from.
inline Series cross_spoke(const ScatteringDiagram& S, const Series& in, const Spoke& sp,
                          const Int& cap) {
    IVec n{sp.dir.y, -sp.dir.x};
    Series g = spoke_poly(S, sp, cap);
    g.erase(Mon{IVec{0, 0}, zero_class(S.labels())});
    std::vector<Series> pows;
    pows.push_back({});
    pows[0][{IVec{0, 0}, zero_class(S.labels())}] = 1;
    while (!pows.back().empty() && static_cast<Int>(pows.size()) <= cap + 1) {
        Series next;
        for (const auto& [key, c] : pows.back())
            for (const auto& [gk, gc] : g) {
                Mon k2{key.m + gk.m, cv_add(key.beta, gk.beta)};
                if (truncation_degree(S, k2.beta) > cap) continue;
                series_add(next, k2, c * gc);
            }
        pows.push_back(std::move(next));
    }
    Series out;
    for (const auto& [key, c] : in) {
        Int h = dot(n, key.m);
        ClassVec base = key.beta;
        if (sp.kink >= 0 && h != 0) base[sp.kink] += h;
        Rat binom = 1;
        for (std::size_t j = 0; j < pows.size(); ++j) {
            if (j > 0) {
                binom *= Rat(h - Int(j) + 1) / Rat(Int(j));
                if (binom == 0) break;
            }
            for (const auto& [gk, gc] : pows[j]) {
                Mon k2{key.m + gk.m, cv_add(base, gk.beta)};
                if (truncation_degree(S, k2.beta) > cap) continue;
                series_add(out, k2, c * binom * gc);
            }
        }
    }
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Diagram construction.
// ---------------------------------------------------------------------------

// Hand-built diagram on free labels, for local consistency computations.
inline ScatteringDiagram abstract_diagram(int nlabels) {
    ScatteringDiagram S;
    S.basis.cut_count = nlabels;
    S.exc_begin = 0;
    S.order = 1;
    return S;
}

inline int add_wall_line(ScatteringDiagram& S, const QVec& a, const QVec& b, const IVec& mdir,
                         const WallFn& f) {
    if (a == b) fail("Internal", "hand-built wall with empty support");
    if (cross(mdir, primitive_dir(b - a)) != 0)
        fail("Internal", "wall direction is not tangent to the support");
    for (const auto& [wt, c] : f)
        if (wt.ell < 1 || truncation_degree(S, wt.beta) < 1)
            fail("Internal", "wall term of nonpositive degree");
    Wall w;
    w.a = a;
    w.b = b;
    w.mdir = mdir;
    w.f = f;
    w.group = S.groups++;
    w.origin = a;
    w.carry = zero_class(S.labels());
    S.walls.push_back(std::move(w));
    return static_cast<int>(S.walls.size()) - 1;
}

namespace detail {

// Extent of ray supports in diagrams without a chart to clip against.
inline const Int synthetic_extent = 4096;

// Walk a wall support from its birth point: along edges of the decomposition
// when the direction rides one, otherwise through 2-cells, crossing interior
// edges with the kink transport (ell, beta) -> (ell, beta + ell<n_e, -d>[C_e])
// and jumping across seams with the gluing.  Vertices passed through apply the
// transport of the edges on the clockwise side of the travel line.  The walk
// stops at the chart boundary and at singular points.
inline void walk_support(ScatteringDiagram& S, const QVec& start, IVec dir, const WallFn& base,
                         int group, int origin_cut) {
    if (!S.has_model) {
        Wall w;
        w.a = start;
        w.b = start + Rat(synthetic_extent) * QVec(dir);
        w.mdir = -dir;
        w.f = base;
        w.group = group;
        w.origin_cut = origin_cut;
        w.origin = start;
        w.carry = zero_class(S.labels());
        S.walls.push_back(std::move(w));
        return;
    }
    const PolyDecomp& D = S.decomp;
    ClassVec sigma = zero_class(S.labels());
    QVec x = start;
    IVec d = dir;

    auto emit = [&](const QVec& pa, const QVec& pb, int on_edge, int cell) {
        Wall w;
        w.a = pa;
        w.b = pb;
        w.mdir = -d;
        for (const auto& [wt, c] : base) w.f[{wt.ell, cv_add(wt.beta, cv_scale(wt.ell, sigma))}] = c;
        w.group = group;
        w.on_edge = on_edge;
        w.cell = cell;
        w.origin_cut = origin_cut;
        w.origin = start;
        w.carry = sigma;
        S.walls.push_back(std::move(w));
    };
    auto cross_coeff = [&](const IVec& edge_dir) {
        Int c = -cross(edge_dir, d);  // <n_e, -d> for n_e = rot90(edge_dir) flipped onto
        if (c < 0) c = -c;            // the incoming side
        if (c == 0) fail("Internal", "support crossing a parallel edge");
        return c;
    };
    auto cross_edge = [&](int e) {
        int lbl = S.kink_of_edge(e);
        if (lbl < 0) fail("Internal", "support crossing an unlabeled edge");
        IVec u = D.verts[D.edges[e][1]] - D.verts[D.edges[e][0]];
        sigma[lbl] += cross_coeff(primitive(u));
    };

    // -1 while at a vertex, else the material face the walk is inside.
    int fcur = -1, vcur = -1;
    if (is_integral(x)) {
        auto it = S.vert_id.find(to_ivec(x));
        if (it != S.vert_id.end()) vcur = it->second;
    }
    if (vcur < 0) {
        int on = -1;
        for (std::size_t e = 0; e < D.edges.size() && on < 0; ++e)
            if (on_segment(QVec(D.verts[D.edges[e][0]]), QVec(D.verts[D.edges[e][1]]), x)) on = e;
        if (on >= 0) {
            IVec u = D.verts[D.edges[on][1]] - D.verts[D.edges[on][0]];
            if (cross(u, d) == 0) fail("Internal", "support born along the middle of an edge");
            int pick = -1;
            for (int fi : D.edge_faces[on]) {
                if (D.faces[fi].cut >= 0) continue;
                for (int v : D.faces[fi].cycle) {
                    QVec r = QVec(D.verts[v]);
                    if (on_segment(QVec(D.verts[D.edges[on][0]]), QVec(D.verts[D.edges[on][1]]), r))
                        continue;
                    if (sgn(cross(QVec(u), r - x)) == sgn(Rat(cross(u, d)))) pick = fi;
                    break;
                }
            }
            if (pick < 0) fail("Internal", "support born on an edge with no face ahead");
            fcur = pick;
        } else {
            for (std::size_t fi = 0; fi < D.faces.size() && fcur < 0; ++fi) {
                if (D.faces[fi].cut >= 0) continue;
                const auto& cyc = D.faces[fi].cycle;
                bool inside = true;
                for (std::size_t i = 0; i < cyc.size() && inside; ++i) {
                    QVec p = QVec(D.verts[cyc[i]]), q = QVec(D.verts[cyc[(i + 1) % cyc.size()]]);
                    if (cross(q - p, x - p) <= 0) inside = false;
                }
                if (inside) fcur = static_cast<int>(fi);
            }
            if (fcur < 0) fail("Internal", "support born outside the material region");
        }
    }

    int guard = 4096;
    while (guard-- > 0) {
        if (fcur < 0) {
            // at vertex vcur
            int node = S.dual.node_of_vert[vcur];
            if (!(x == start)) {
                if (!S.dual.nodes[node].exceptional.empty()) return;  // singular endpoint
                if (!S.dual.stars[node].closed) return;               // chart boundary
                if (S.dual.nodes[node].reps.size() > 1)
                    fail("Internal", "wall support passes through a seam vertex");
                for (int e : S.vert_edges[vcur]) {
                    int other = D.edges[e][0] == vcur ? D.edges[e][1] : D.edges[e][0];
                    IVec u = D.verts[other] - D.verts[vcur];
                    // the straight support is perturbed to pass the vertex on its
                    // clockwise side, crossing the edges hanging off to the right
                    if (cross(d, u) >= 0) continue;
                    int lbl = S.kink_of_edge(e);
                    if (lbl < 0) continue;
                    sigma[lbl] += cross_coeff(primitive(u));
                }
            }
            auto nb = S.vert_id.find(D.verts[vcur] + d);
            int e = nb != S.vert_id.end() ? D.edge_id(vcur, nb->second) : -1;
            if (e >= 0 && S.dual.dual_edge_of[e] >= 0 &&
                S.dual.edges[S.dual.dual_edge_of[e]].interior) {
                emit(x, QVec(D.verts[nb->second]), e, -1);
                x = QVec(D.verts[nb->second]);
                vcur = nb->second;
                continue;
            }
            int f = -1;
            for (int fi : D.vert_faces[vcur]) {
                if (D.faces[fi].cut >= 0) continue;
                const auto& cyc = D.faces[fi].cycle;
                std::size_t m = cyc.size();
                for (std::size_t i = 0; i < m; ++i) {
                    if (cyc[i] != vcur) continue;
                    IVec nv = D.verts[cyc[(i + 1) % m]] - D.verts[vcur];
                    IVec pv = D.verts[cyc[(i + m - 1) % m]] - D.verts[vcur];
                    if (cross(nv, d) > 0 && cross(d, pv) > 0) f = fi;
                    break;
                }
                if (f >= 0) break;
            }
            if (f < 0) return;  // no material continuation
            fcur = f;
            continue;
        }
        // inside face fcur: find the exit of the ray x + t d
        const auto& cyc = D.faces[fcur].cycle;
        std::size_t m = cyc.size();
        Rat best_t;
        int best_i = -1;
        for (std::size_t i = 0; i < m; ++i) {
            QVec p = QVec(D.verts[cyc[i]]), q = QVec(D.verts[cyc[(i + 1) % m]]);
            Rat det = cross(QVec(d), q - p);
            if (det == 0) continue;
            Rat t = cross(p - x, q - p) / det;
            Rat s = cross(p - x, QVec(d)) / det;
            if (t <= 0 || s < 0 || s > 1) continue;
            if (best_i < 0 || t < best_t) {
                best_t = t;
                best_i = static_cast<int>(i);
            }
        }
        if (best_i < 0) fail("Internal", "support walk lost inside a face");
        QVec y = x + best_t * QVec(d);
        emit(x, y, -1, fcur);
        int hit_vert = -1;
        for (std::size_t i = 0; i < m; ++i)
            if (QVec(D.verts[cyc[i]]) == y) hit_vert = cyc[i];
        if (hit_vert >= 0) {
            x = y;
            vcur = hit_vert;
            fcur = -1;
            continue;
        }
        int e = D.edge_id(cyc[best_i], cyc[(best_i + 1) % m]);
        if (e < 0) fail("Internal", "face boundary is not an edge");
        int de = S.dual.dual_edge_of[e];
        if (de < 0) fail("Internal", "support leaving through an immaterial edge");
        if (!S.dual.edges[de].interior) return;  // clipped at the chart boundary
        cross_edge(e);
        auto si = S.dual.seams.find(e);
        if (si != S.dual.seams.end()) {
            const CutData& cd = S.poly.cuts[si->second.cut];
            IAff g = si->second.side == 0 ? cd.glue : cd.glue.inverse();
            x = g.apply(y);
            d = g.M.apply(d);
            int e2 = si->second.partner_edge;
            int f2 = -1;
            for (int fi : D.edge_faces[e2])
                if (D.faces[fi].cut < 0) f2 = fi;
            if (f2 < 0) fail("Internal", "seam has no material side");
            fcur = f2;
            continue;
        }
        int f2 = -1;
        for (int fi : D.edge_faces[e])
            if (D.faces[fi].cut < 0 && fi != fcur) f2 = fi;
        if (f2 < 0) fail("Internal", "interior edge with one material side");
        x = y;
        fcur = f2;
    }
    fail("Internal", "support walk exceeded its budget");
}

}  // namespace detail

// Kinks on all interior edges (implicit in the class basis) and, for each
// cut, walls out of the apex along both invariant directions carrying
// 1 + t^{E} z^{m} with m pointing back toward the apex.
inline ScatteringDiagram initial_diagram(const SymingtonPolytope& P, const PolyDecomp& D) {
    ScatteringDiagram S;
    S.has_model = true;
    S.poly = P;
    S.decomp = D;
    S.dual = dual_complex(P, D);
    S.basis = class_basis(S.dual);
    S.exc_begin = S.basis.curve_count;
    S.pairing = intersection_pairing(P, D, S.dual, S.basis);
    S.order = 1;
    for (const auto& e : P.mp.edges) S.outer.push_back(QVec(e.from));
    for (std::size_t i = 0; i < D.verts.size(); ++i) S.vert_id.emplace(D.verts[i], static_cast<int>(i));
    S.vert_edges.resize(D.verts.size());
    for (std::size_t e = 0; e < D.edges.size(); ++e) {
        S.vert_edges[D.edges[e][0]].push_back(static_cast<int>(e));
        S.vert_edges[D.edges[e][1]].push_back(static_cast<int>(e));
    }
    for (std::size_t ci = 0; ci < P.cuts.size(); ++ci) {
        const CutData& cd = P.cuts[ci];
        int va = S.vert_id.at(cd.apex);
        WallFn base;
        base[{Int(1), unit_class(S.labels(), S.basis.exceptional_label(static_cast<int>(ci)))}] = 1;
        for (const IVec& u : {cd.invariant_dir, -cd.invariant_dir}) {
            auto nb = S.vert_id.find(cd.apex + u);
            int e = nb != S.vert_id.end() ? D.edge_id(va, nb->second) : -1;
            if (e >= 0 && S.dual.dual_edge_of[e] >= 0 &&
                S.dual.edges[S.dual.dual_edge_of[e]].interior) {
                detail::walk_support(S, QVec(cd.apex), u, base, S.groups++, static_cast<int>(ci));
                continue;
            }
            bool in_face = false;
            for (int fi : D.vert_faces[va]) {
                if (D.faces[fi].cut >= 0) continue;
                const auto& cyc = D.faces[fi].cycle;
                std::size_t m = cyc.size();
                for (std::size_t i = 0; i < m; ++i) {
                    if (cyc[i] != va) continue;
                    IVec nv = D.verts[cyc[(i + 1) % m]] - cd.apex;
                    IVec pv = D.verts[cyc[(i + m - 1) % m]] - cd.apex;
                    if (cross(nv, u) > 0 && cross(u, pv) > 0) in_face = true;
                    break;
                }
            }
            if (in_face)
                fail("UnalignedSingularity", "invariant direction " + str(u) +
                                                 " at apex " + str(cd.apex) +
                                                 " is not an edge direction of the decomposition");
            Wall w;  // nothing material that way: the wall degenerates to the apex
            w.a = w.b = QVec(cd.apex);
            w.mdir = -u;
            w.f = base;
            w.group = S.groups++;
            w.origin_cut = static_cast<int>(ci);
            w.origin = QVec(cd.apex);
            w.carry = zero_class(S.labels());
            S.walls.push_back(std::move(w));
        }
    }
    return S;
}

// ---------------------------------------------------------------------------
// Joints and path-ordered products.
// ---------------------------------------------------------------------------

inline std::vector<JointRef> joints(const ScatteringDiagram& S) {
    std::vector<JointRef> out;
    std::set<QVec> vert_pos;
    if (S.has_model) {
        for (std::size_t ni = 0; ni < S.dual.nodes.size(); ++ni) {
            QVec pos;
            bool first = true;
            for (int r : S.dual.nodes[ni].reps) {
                QVec p = QVec(S.decomp.verts[r]);
                vert_pos.insert(p);
                if (first || p < pos) pos = p;
                first = false;
            }
            if (S.dual.stars[ni].closed && S.dual.nodes[ni].exceptional.empty())
                out.push_back({pos, static_cast<int>(ni)});
        }
    }
    std::set<QVec> mids;
    for (std::size_t i = 0; i < S.walls.size(); ++i) {
        if (S.walls[i].degenerate()) continue;
        for (std::size_t j = i + 1; j < S.walls.size(); ++j) {
            if (S.walls[j].degenerate()) continue;
            SegHit h = seg_intersect(S.walls[i].a, S.walls[i].b, S.walls[j].a, S.walls[j].b);
            if (h.kind != SegHit::Point) continue;
            if (vert_pos.count(h.at)) continue;
            if (S.has_model) {
                Where w = locate(S.outer, h.at);
                if (w == Where::Boundary) continue;
                if (w == Where::Outside) fail("Internal", "wall joint outside the chart");
                bool on_seam = false;
                for (const auto& cd : S.poly.cuts)
                    if (on_segment(QVec(cd.apex), QVec(cd.base0), h.at) ||
                        on_segment(QVec(cd.apex), QVec(cd.base1), h.at))
                        on_seam = true;
                if (on_seam) fail("Internal", "wall joint in the middle of a seam");
            }
            mids.insert(h.at);
        }
    }
    for (const auto& p : mids) out.push_back({p, -1});
    std::sort(out.begin(), out.end());
    return out;
}

namespace detail {

struct AssembledJoint {
    std::vector<Spoke> spokes;  // counterclockwise, lexicographically smallest direction first
    bool vertex = false;
    int node = -1;
    QVec pos;
};

inline void rotate_lex_min(std::vector<Spoke>& spokes) {
    if (spokes.empty()) return;
    std::size_t best = 0;
    for (std::size_t i = 1; i < spokes.size(); ++i)
        if (spokes[i].dir < spokes[best].dir) best = i;
    std::rotate(spokes.begin(), spokes.begin() + best, spokes.end());
}

inline AssembledJoint assemble_joint(const ScatteringDiagram& S, const JointRef& j) {
    AssembledJoint out;
    out.pos = j.pos;
    if (j.node >= 0) {
        out.vertex = true;
        out.node = j.node;
        const NodeStar& star = S.dual.stars[j.node];
        if (!star.closed) fail("Internal", "joint at a boundary vertex");
        if (!(star.holonomy == identity_mat()))
            fail("Internal", "joint with nontrivial loop holonomy");
        std::size_t L = star.steps.size();
        for (std::size_t k = 0; k < L; ++k) {
            const StarStep& st = star.steps[k];
            Spoke sp;
            sp.dir = st.dir;
            sp.kink = S.basis.label_of_dual_edge[st.dual_edge];
            if (sp.kink < 0) fail("Internal", "closed star crossing a boundary curve");
            int partner = -1;
            if (auto si = S.dual.seams.find(st.edge); si != S.dual.seams.end())
                partner = si->second.partner_edge;
            for (const auto& w : S.walls) {
                if (w.degenerate()) continue;
                if (w.on_edge == st.edge)
                    sp.fns.push_back({st.chart.apply(w.mdir), &w.f});
                else if (partner >= 0 && w.on_edge == partner)
                    fail("Internal", "wall on the far copy of a glued seam");
            }
            out.spokes.push_back(std::move(sp));
            // walls inside the wedge between this spoke and the next
            int face = st.face_next;
            if (face < 0) fail("Internal", "closed star with an open wedge");
            Mat2 W = k + 1 < L ? star.steps[k + 1].chart : star.holonomy;
            IVec wedge_from = st.dir;
            IVec wedge_to =
                k + 1 < L ? star.steps[k + 1].dir : star.holonomy.apply(star.steps[0].dir);
            int rep = -1;
            for (int v : S.decomp.faces[face].cycle)
                if (S.dual.node_of_vert[v] == j.node) rep = v;
            if (rep < 0) fail("Internal", "wedge face misses the node");
            QVec rp = QVec(S.decomp.verts[rep]);
            std::vector<Spoke> inner;
            for (const auto& w : S.walls) {
                if (w.degenerate() || w.cell != face) continue;
                IVec ldir;
                if (w.a == rp)
                    ldir = primitive_dir(w.b - w.a);
                else if (w.b == rp)
                    ldir = primitive_dir(w.a - w.b);
                else
                    continue;
                IVec gdir = W.apply(ldir);
                if (!(cross(wedge_from, gdir) > 0 && cross(gdir, wedge_to) > 0))
                    fail("Internal", "wedge wall outside its wedge");
                bool merged = false;
                for (auto& sp2 : inner)
                    if (sp2.dir == gdir) {
                        sp2.fns.push_back({W.apply(w.mdir), &w.f});
                        merged = true;
                    }
                if (!merged) {
                    Spoke sp2;
                    sp2.dir = gdir;
                    sp2.fns.push_back({W.apply(w.mdir), &w.f});
                    inner.push_back(std::move(sp2));
                }
            }
            std::sort(inner.begin(), inner.end(),
                      [](const Spoke& a, const Spoke& b) { return cross(a.dir, b.dir) > 0; });
            for (auto& sp2 : inner) out.spokes.push_back(std::move(sp2));
        }
        rotate_lex_min(out.spokes);
        return out;
    }
    std::map<IVec, Spoke> bydir;
    auto touch = [&](const IVec& dir) -> Spoke& {
        auto [it, fresh] = bydir.try_emplace(dir);
        if (fresh) it->second.dir = dir;
        return it->second;
    };
    if (S.has_model) {
        for (std::size_t e = 0; e < S.decomp.edges.size(); ++e) {
            QVec p = QVec(S.decomp.verts[S.decomp.edges[e][0]]);
            QVec q = QVec(S.decomp.verts[S.decomp.edges[e][1]]);
            if (p == j.pos || q == j.pos || !on_segment(p, q, j.pos)) continue;
            int lbl = S.kink_of_edge(static_cast<int>(e));
            if (lbl < 0) fail("Internal", "joint inside an unlabeled edge");
            touch(primitive_dir(q - p)).kink = lbl;
            touch(primitive_dir(p - q)).kink = lbl;
            break;
        }
    }
    for (const auto& w : S.walls) {
        if (w.degenerate()) continue;
        if (w.a == j.pos)
            touch(primitive_dir(w.b - w.a)).fns.push_back({w.mdir, &w.f});
        else if (w.b == j.pos)
            touch(primitive_dir(w.a - w.b)).fns.push_back({w.mdir, &w.f});
        else if (on_segment(w.a, w.b, j.pos)) {
            touch(primitive_dir(w.b - w.a)).fns.push_back({w.mdir, &w.f});
            touch(primitive_dir(w.a - w.b)).fns.push_back({w.mdir, &w.f});
        }
    }
    for (auto& [dir, sp] : bydir) out.spokes.push_back(std::move(sp));
    auto half = [](const IVec& v) { return v.y > 0 || (v.y == 0 && v.x > 0) ? 0 : 1; };
    std::sort(out.spokes.begin(), out.spokes.end(), [&](const Spoke& a, const Spoke& b) {
        if (half(a.dir) != half(b.dir)) return half(a.dir) < half(b.dir);
        return cross(a.dir, b.dir) > 0;
    });
    rotate_lex_min(out.spokes);
    return out;
}

// Where a ray out of the joint in joint-frame direction wdir starts in the
// chart: the position and direction handed to the support walker.
inline std::pair<QVec, IVec> launch_ray(const ScatteringDiagram& S, const AssembledJoint& aj,
                                        const IVec& wdir) {
    if (!aj.vertex) return {aj.pos, wdir};
    const NodeStar& star = S.dual.stars[aj.node];
    std::size_t L = star.steps.size();
    for (std::size_t k = 0; k < L; ++k) {
        const StarStep& st = star.steps[k];
        if (st.dir == wdir)
            return {QVec(S.decomp.verts[st.vert]), st.chart.inverse().apply(wdir)};
        IVec wedge_to = k + 1 < L ? star.steps[k + 1].dir : star.holonomy.apply(star.steps[0].dir);
        if (cross(st.dir, wdir) > 0 && cross(wdir, wedge_to) > 0) {
            Mat2 W = k + 1 < L ? star.steps[k + 1].chart : star.holonomy;
            int rep = -1;
            for (int v : S.decomp.faces[st.face_next].cycle)
                if (S.dual.node_of_vert[v] == aj.node) rep = v;
            if (rep < 0) fail("Internal", "wedge face misses the node");
            return {QVec(S.decomp.verts[rep]), W.inverse().apply(wdir)};
        }
    }
    fail("Internal", "ray direction not found in the star");
}

inline Series pop_series(const ScatteringDiagram& S, const JointRef& j, const Int& cap,
                         const IVec& q) {
    AssembledJoint aj = assemble_joint(S, j);
    Series s;
    s[{q, zero_class(S.labels())}] = 1;
    for (const auto& sp : aj.spokes) s = cross_spoke(S, s, sp, cap);
    return s;
}

}  // namespace detail

// Composite of the crossing automorphisms around a counterclockwise loop at
// the joint, applied to the test monomial z^q and truncated at degree k.
inline std::vector<AutoTerm> path_ordered_product(const ScatteringDiagram& S, const JointRef& j,
                                                  int k, const IVec& q) {
    detail::Series s = detail::pop_series(S, j, Int(k), q);
    std::vector<AutoTerm> out;
    for (const auto& [key, c] : s) out.push_back({key.m, key.beta, c});
    return out;
}

// Crossing a single wall: the monomial c t^beta z^m picks up
// (t^{kink} f_W)^{<n_W, m>} with n_W = side * rot90(m_W).  The caller picks
// the side from which the monomial arrives, so the exponent must come out
// nonnegative; path-ordered products use the internal unrestricted crossing.
inline std::vector<AutoTerm> wall_cross(const ScatteringDiagram& S, const Rat& c,
                                        const ClassVec& beta, const IVec& m, const Wall& W,
                                        int side, int k) {
    detail::Spoke sp;
    sp.dir = side > 0 ? -W.mdir : W.mdir;  // rot90(spoke dir rotated back) = side * rot90(mdir)
    if (dot(IVec{sp.dir.y, -sp.dir.x}, m) < 0)
        fail("WrongSide", "monomial direction has negative pairing with the wall normal");
    if (W.on_edge >= 0) sp.kink = S.kink_of_edge(W.on_edge);
    sp.fns.push_back({W.mdir, &W.f});
    detail::Series s;
    s[{m, beta}] = c;
    s = detail::cross_spoke(S, s, sp, Int(k));
    std::vector<AutoTerm> out;
    for (const auto& [key, cc] : s) out.push_back({key.m, key.beta, cc});
    return out;
}

// ---------------------------------------------------------------------------
// Consistency.
// ---------------------------------------------------------------------------

namespace detail {

struct Defect {
    IVec q;       // test monomial that exposed it
    IVec s;       // z-exponent shift of the defective group
    Rat coeff;    // group sum
    std::vector<ClassVec> reps;  // class presentations occurring in the group
    Series before;               // the path-ordered product that exposed it
};

// Residual groups of the loop at j, classes compared through their divisor
// degrees; empty result means consistent at degree cap.
inline std::optional<Defect> find_defect(const ScatteringDiagram& S, const JointRef& j,
                                         const Int& cap) {
    for (const IVec& q : {IVec{1, 0}, IVec{0, 1}}) {
        Series s = pop_series(S, j, cap, q);
        series_add(s, {q, zero_class(S.labels())}, Rat(-1));
        struct Group {
            Rat sum;
            std::set<ClassVec> reps;
            Int mindeg;
        };
        std::map<std::pair<ClassVec, IVec>, Group> groups;
        for (const auto& [key, c] : s) {
            auto& g = groups[{class_image(S, key.beta), key.m - q}];
            Int deg = truncation_degree(S, key.beta);
            if (g.reps.empty() || deg < g.mindeg) g.mindeg = deg;
            g.sum += c;
            g.reps.insert(key.beta);
        }
        const std::pair<const std::pair<ClassVec, IVec>, Group>* best = nullptr;
        for (const auto& entry : groups) {
            if (entry.second.sum == 0) continue;
            if (!best || entry.second.mindeg < best->second.mindeg ||
                (entry.second.mindeg == best->second.mindeg && entry.first < best->first))
                best = &entry;
        }
        if (!best) continue;
        if (is_zero(best->first.second))
            fail("Internal", "monomial-preserving defect at " + str(j.pos));
        Defect d;
        d.q = q;
        d.s = best->first.second;
        d.coeff = best->second.sum;
        d.reps.assign(best->second.reps.begin(), best->second.reps.end());
        d.before = std::move(s);
        series_add(d.before, {q, zero_class(S.labels())}, Rat(1));
        return d;
    }
    return std::nullopt;
}

// Cancel one defective group by a new wall term on the ray from the joint
// opposite to the group's monomial direction.  A unit probe term with empty
// class is inserted first to measure the loop's response; the response fixes
// both the coefficient and the class of the real term.
inline void resolve_defect(ScatteringDiagram& S, const JointRef& j, const Defect& d,
                           const Int& cap) {
    IVec mh = primitive(d.s);
    Int ell = content(d.s);
    AssembledJoint aj = assemble_joint(S, j);
    auto [start, ldir_ray] = launch_ray(S, aj, -mh);
    IVec local_mdir = -ldir_ray;
    auto key = std::make_pair(start, local_mdir);
    auto found = S.ray_groups.find(key);
    std::size_t w0 = S.walls.size();
    std::vector<int> pieces;
    if (found != S.ray_groups.end()) {
        for (std::size_t i = 0; i < S.walls.size(); ++i)
            if (S.walls[i].group == found->second) pieces.push_back(static_cast<int>(i));
        for (int i : pieces) {
            WallTerm probe{ell, cv_scale(ell, S.walls[i].carry)};
            if (S.walls[i].f.count(probe)) fail("Internal", "probe collides with a wall term");
            S.walls[i].f[probe] = 1;
        }
    } else {
        WallFn probe;
        probe[{ell, zero_class(S.labels())}] = 1;
        walk_support(S, start, ldir_ray, probe, S.groups, -1);
        for (std::size_t i = w0; i < S.walls.size(); ++i) pieces.push_back(static_cast<int>(i));
    }
    Series after = pop_series(S, j, cap, d.q);
    for (const auto& [k2, c2] : d.before) series_add(after, k2, -c2);
    Rat cp;
    std::set<ClassVec> probe_reps;
    for (const auto& [k2, c2] : after) {
        if (!(k2.m - d.q == d.s) || truncation_degree(S, k2.beta) != 0) continue;
        cp += c2;
        probe_reps.insert(k2.beta);
    }
    if (cp == 0) fail("Internal", "probe wall does not reach its own defect");
    std::optional<ClassVec> B;
    for (const auto& bd : d.reps) {
        for (const auto& bp : probe_reps) {
            ClassVec cand = cv_sub(bd, bp);
            if (cv_nonneg(cand) && (!B || cand < *B)) B = cand;
        }
    }
    if (!B) fail("Internal", "defect class is not effective");
    if (truncation_degree(S, *B) < ell) fail("Internal", "defect class below the wall degree");
    Rat w = -d.coeff / cp;
    if (found != S.ray_groups.end()) {
        for (int i : pieces) {
            S.walls[i].f.erase(WallTerm{ell, cv_scale(ell, S.walls[i].carry)});
            WallTerm real{ell, cv_add(*B, cv_scale(ell, S.walls[i].carry))};
            auto [it, fresh] = S.walls[i].f.try_emplace(real, w);
            if (!fresh) {
                it->second += w;
                if (it->second == 0) S.walls[i].f.erase(it);
            }
        }
    } else {
        for (int i : pieces) {
            WallTerm marker{ell, cv_scale(ell, S.walls[i].carry)};
            Rat c0 = S.walls[i].f.at(marker);
            S.walls[i].f.erase(marker);
            S.walls[i].f[{ell, cv_add(*B, cv_scale(ell, S.walls[i].carry))}] = c0 * w;
        }
        S.ray_groups.emplace(key, S.groups);
        ++S.groups;
    }
}

}  // namespace detail

inline bool joint_consistent(const ScatteringDiagram& S, const JointRef& j, int k) {
    return !detail::find_defect(S, j, Int(k)).has_value();
}

// Add walls degree by degree until every joint's path-ordered product is the
// identity modulo degree k+1.  Joints are handled in order of position, the
// lowest-degree defective group first, and the scan restarts after every
// insertion, so the result is deterministic.
inline void make_consistent(ScatteringDiagram& S, int k) {
    long budget = 4096;
    if (const char* env = std::getenv("MIRROR_ORDER_BUDGET")) budget = std::atol(env);
    for (int d = 2; d <= k; ++d) {
        for (;;) {
            bool fixed = false;
            for (const JointRef& j : joints(S)) {
                auto defect = detail::find_defect(S, j, Int(d));
                if (!defect) continue;
                if (--budget < 0)
                    fail("OrderBudgetExceeded",
                         "wall budget exhausted at degree " + std::to_string(d));
                detail::resolve_defect(S, j, *defect, Int(d));
                fixed = true;
                break;
            }
            if (!fixed) break;
        }
    }
    if (S.order < k) S.order = k;
}

}  // namespace mirror
