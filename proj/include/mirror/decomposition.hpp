#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mirror/symington.hpp"

namespace mirror {

// ---------------------------------------------------------------------------
// PL functions over P-bar and the regular subdivisions they induce.
// ---------------------------------------------------------------------------

struct LiftPoint {
    IVec p;
    Rat h;
};

// Heights over a subset of the lattice points of P-bar, kept in pull order
// with the polygon corners first.  The induced decomposition is the
// projection of the lower convex hull of the lifted points; lattice points
// without an assigned height impose no constraint.
struct PLFunction {
    SymingtonPolytope poly;
    std::vector<LiftPoint> lifts;

    int find(const IVec& q) const {
        for (std::size_t i = 0; i < lifts.size(); ++i)
            if (lifts[i].p == q) return static_cast<int>(i);
        return -1;
    }
};

inline PLFunction trivial_pl(const SymingtonPolytope& P) {
    PLFunction f{P, {}};
    for (const auto& e : P.mp.edges) f.lifts.push_back({e.from, Rat(0)});
    return f;
}

struct DecompFace {
    std::vector<int> cycle;  // counterclockwise vertex indices
    int cut = -1;            // index of the cut triangle containing the face, -1 if none
};

struct PolyDecomp {
    std::vector<IVec> verts;
    std::vector<std::array<int, 2>> edges;  // vertex index pairs, smaller first
    std::vector<DecompFace> faces;
    std::vector<std::vector<int>> vert_faces;
    std::vector<std::vector<int>> edge_faces;

    int edge_id(int a, int b) const {
        std::array<int, 2> key{std::min(a, b), std::max(a, b)};
        for (std::size_t i = 0; i < edges.size(); ++i)
            if (edges[i] == key) return static_cast<int>(i);
        return -1;
    }
};

namespace detail {

inline int orient2(const IVec& a, const IVec& b, const IVec& c) {
    return sgn(cross(b - a, c - a));
}

// Sign of the lifted 3x3 determinant; negative when q lifts strictly below
// the plane through the lifts of a counterclockwise triangle (a, b, c).
inline int lift_side(const IVec& a, const Rat& ha, const IVec& b, const Rat& hb,
                     const IVec& c, const Rat& hc, const IVec& q, const Rat& hq) {
    Rat x1(b.x - a.x), y1(b.y - a.y), h1 = hb - ha;
    Rat x2(c.x - a.x), y2(c.y - a.y), h2 = hc - ha;
    Rat x3(q.x - a.x), y3(q.y - a.y), h3 = hq - ha;
    Rat det = x1 * (y2 * h3 - h2 * y3) - y1 * (x2 * h3 - h2 * x3) + h1 * (x2 * y3 - y2 * x3);
    return sgn(det);
}

struct Tri {
    std::array<int, 3> v;
    std::array<int, 3> nb{-1, -1, -1};  // nb[j] faces edge (v[j], v[j+1])
    bool alive = true;
};

// Incremental regular triangulation of a convex polygon: points are inserted
// in pull order with Lawson flips driven by the exact lifted orientation test.
struct RegularTriangulation {
    std::vector<IVec> pts;
    std::vector<Rat> h;
    std::vector<Tri> tris;
    std::vector<IVec> hidden;  // lift points whose lift was not below the hull

    void init_polygon(const std::vector<LiftPoint>& corners) {
        for (const auto& c : corners) {
            pts.push_back(c.p);
            h.push_back(c.h);
        }
        int n = static_cast<int>(corners.size());
        for (int i = 1; i + 1 < n; ++i) {
            Tri t;
            t.v = {0, i, i + 1};
            t.nb = {i == 1 ? -1 : static_cast<int>(tris.size()) - 1, -1,
                    i + 2 < n ? static_cast<int>(tris.size()) + 1 : -1};
            tris.push_back(t);
        }
        // corner heights need not be flat, so settle the fan diagonals
        std::vector<std::array<int, 3>> stack;
        for (std::size_t t = 0; t < tris.size(); ++t)
            for (int j = 0; j < 3; ++j)
                stack.push_back({static_cast<int>(t), tris[t].v[j], tris[t].v[(j + 1) % 3]});
        legalize(stack);
    }

    int locate(const IVec& q) const {
        for (std::size_t t = 0; t < tris.size(); ++t) {
            if (!tris[t].alive) continue;
            const auto& v = tris[t].v;
            if (orient2(pts[v[0]], pts[v[1]], q) >= 0 && orient2(pts[v[1]], pts[v[2]], q) >= 0 &&
                orient2(pts[v[2]], pts[v[0]], q) >= 0)
                return static_cast<int>(t);
        }
        return -1;
    }

    int lift_test(int t, int pi) const {
        const auto& v = tris[t].v;
        return lift_side(pts[v[0]], h[v[0]], pts[v[1]], h[v[1]], pts[v[2]], h[v[2]], pts[pi], h[pi]);
    }

    void relink(int nb, int from, int to) {
        if (nb < 0) return;
        for (int j = 0; j < 3; ++j)
            if (tris[nb].nb[j] == from) {
                tris[nb].nb[j] = to;
                return;
            }
        fail("Internal", "triangulation adjacency out of sync");
    }

    int edge_index(int t, int a, int b) const {
        for (int j = 0; j < 3; ++j)
            if (tris[t].v[j] == a && tris[t].v[(j + 1) % 3] == b) return j;
        return -1;
    }

    void legalize(std::vector<std::array<int, 3>>& stack) {
        while (!stack.empty()) {
            auto [t, a, b] = stack.back();
            stack.pop_back();
            if (t < 0 || !tris[t].alive) continue;
            int j = edge_index(t, a, b);
            if (j < 0) continue;
            int u = tris[t].nb[j];
            if (u < 0) continue;
            int ju = edge_index(u, b, a);
            if (ju < 0) fail("Internal", "triangulation adjacency out of sync");
            int d = tris[u].v[(ju + 2) % 3];
            if (lift_test(t, d) >= 0) continue;
            int c = tris[t].v[(j + 2) % 3];
            if (orient2(pts[a], pts[d], pts[c]) <= 0 || orient2(pts[d], pts[b], pts[c]) <= 0)
                continue;  // non-convex quad: flip impossible
            int nbB = tris[t].nb[(j + 1) % 3], nbC = tris[t].nb[(j + 2) % 3];
            int nbD = tris[u].nb[(ju + 1) % 3], nbE = tris[u].nb[(ju + 2) % 3];
            tris[t].v = {a, d, c};
            tris[t].nb = {nbD, u, nbC};
            tris[u].v = {d, b, c};
            tris[u].nb = {nbE, nbB, t};
            relink(nbD, u, t);
            relink(nbB, t, u);
            stack.push_back({t, a, d});
            stack.push_back({u, d, b});
        }
    }

    void insert(const IVec& p, const Rat& hp) {
        int pi = static_cast<int>(pts.size());
        pts.push_back(p);
        h.push_back(hp);
        int t = locate(p);
        if (t < 0) fail("BadPull", "pulled point " + str(p) + " lies outside the polytope");
        if (lift_test(t, pi) >= 0) {
            hidden.push_back(p);
            return;
        }
        const auto v = tris[t].v;
        int z0 = orient2(pts[v[0]], pts[v[1]], p) == 0 ? 0 : -1;
        int z1 = orient2(pts[v[1]], pts[v[2]], p) == 0 ? 1 : -1;
        int z2 = orient2(pts[v[2]], pts[v[0]], p) == 0 ? 2 : -1;
        int zeros = (z0 >= 0) + (z1 >= 0) + (z2 >= 0);
        if (zeros >= 2) fail("BadPull", "pulled point duplicates a vertex");
        std::vector<std::array<int, 3>> stack;
        if (zeros == 0) {
            int a = v[0], b = v[1], c = v[2];
            int nb0 = tris[t].nb[0], nb1 = tris[t].nb[1], nb2 = tris[t].nb[2];
            int t1 = static_cast<int>(tris.size());
            int t2 = t1 + 1;
            tris[t].v = {a, b, pi};
            tris[t].nb = {nb0, t1, t2};
            tris.push_back({{b, c, pi}, {nb1, t2, t}, true});
            tris.push_back({{c, a, pi}, {nb2, t, t1}, true});
            relink(nb1, t, t1);
            relink(nb2, t, t2);
            stack = {{t, a, b}, {t1, b, c}, {t2, c, a}};
        } else {
            int j = z0 >= 0 ? z0 : (z1 >= 0 ? z1 : z2);
            int a = v[j], b = v[(j + 1) % 3], c = v[(j + 2) % 3];
            int u = tris[t].nb[j];
            int nbB = tris[t].nb[(j + 1) % 3], nbC = tris[t].nb[(j + 2) % 3];
            int t1 = static_cast<int>(tris.size());
            tris[t].v = {a, pi, c};
            tris[t].nb = {-1, t1, nbC};
            tris.push_back({{pi, b, c}, {-1, nbB, t}, true});
            relink(nbB, t, t1);
            stack = {{t, c, a}, {t1, b, c}};
            if (u >= 0) {
                int ju = edge_index(u, b, a);
                if (ju < 0) fail("Internal", "triangulation adjacency out of sync");
                int d = tris[u].v[(ju + 2) % 3];
                int nbD = tris[u].nb[(ju + 1) % 3], nbE = tris[u].nb[(ju + 2) % 3];
                int t2 = static_cast<int>(tris.size());
                tris[u].v = {b, pi, d};
                tris[u].nb = {-1, t2, nbE};
                tris.push_back({{pi, a, d}, {-1, nbD, u}, true});
                relink(nbD, u, t2);
                tris[t].nb[0] = t2;
                tris[t2].nb[0] = t;
                tris[t1].nb[0] = u;
                tris[u].nb[0] = t1;
                stack.push_back({u, d, b});
                stack.push_back({t2, a, d});
            }
        }
        legalize(stack);
    }

    bool locally_convex() const {
        for (std::size_t t = 0; t < tris.size(); ++t) {
            if (!tris[t].alive) continue;
            for (int j = 0; j < 3; ++j) {
                int u = tris[t].nb[j];
                if (u < static_cast<int>(t)) continue;
                int a = tris[t].v[j], b = tris[t].v[(j + 1) % 3];
                int ju = edge_index(u, b, a);
                if (ju < 0) return false;
                int d = tris[u].v[(ju + 2) % 3];
                if (lift_test(static_cast<int>(t), d) < 0) return false;
            }
        }
        return true;
    }

    // Value of the induced PL function at a lattice point of P-bar.
    Rat value_at(const IVec& q) const {
        int t = locate(q);
        if (t < 0) fail("BadPull", "point " + str(q) + " lies outside the polytope");
        const auto& v = tris[t].v;
        IVec a = pts[v[0]], b = pts[v[1]], c = pts[v[2]];
        Rat area(cross(b - a, c - a));
        Rat wa(cross(b - q, c - q)), wb(cross(c - q, a - q)), wc(cross(a - q, b - q));
        return (wa * h[v[0]] + wb * h[v[1]] + wc * h[v[2]]) / area;
    }
};

struct UnionFind {
    std::vector<int> up;
    explicit UnionFind(int n) : up(n) {
        for (int i = 0; i < n; ++i) up[i] = i;
    }
    int find(int a) {
        while (up[a] != a) a = up[a] = up[up[a]];
        return a;
    }
    void unite(int a, int b) { up[find(a)] = find(b); }
};

struct Build {
    RegularTriangulation rt;
    PolyDecomp decomp;
    bool clean = false;
};

inline bool inside_triangle_strict(const IVec& a, const IVec& b, const IVec& c, const QVec& q) {
    QVec qa(a), qb(b), qc(c);
    return sgn(cross(qb - qa, q - qa)) > 0 && sgn(cross(qc - qb, q - qb)) > 0 &&
           sgn(cross(qa - qc, q - qc)) > 0;
}

inline std::array<IVec, 3> cut_triangle_ccw(const CutData& c) {
    if (cross(c.base0 - c.apex, c.base1 - c.apex) <= 0)
        fail("BadCut", "cut triangle is not positively oriented");
    return {c.apex, c.base0, c.base1};
}

inline Build build_subdivision(const PLFunction& f) {
    const auto& edges = f.poly.mp.edges;
    std::size_t n = edges.size();
    if (f.lifts.size() < n) fail("BadPull", "height list lost the polygon corners");
    for (std::size_t i = 0; i < n; ++i)
        if (f.lifts[i].p != edges[i].from) fail("BadPull", "height list lost the polygon corners");

    Build out;
    out.rt.init_polygon({f.lifts.begin(), f.lifts.begin() + n});
    for (std::size_t i = n; i < f.lifts.size(); ++i) out.rt.insert(f.lifts[i].p, f.lifts[i].h);
    if (!out.rt.hidden.empty() || !out.rt.locally_convex()) return out;

    auto& rt = out.rt;
    int T = static_cast<int>(rt.tris.size());
    UnionFind uf(T);
    for (int t = 0; t < T; ++t) {
        if (!rt.tris[t].alive) continue;
        for (int j = 0; j < 3; ++j) {
            int u = rt.tris[t].nb[j];
            if (u < t) continue;
            int a = rt.tris[t].v[j], b = rt.tris[t].v[(j + 1) % 3];
            int ju = rt.edge_index(u, b, a);
            int d = rt.tris[u].v[(ju + 2) % 3];
            if (rt.lift_test(t, d) == 0) uf.unite(t, u);
        }
    }

    PolyDecomp& D = out.decomp;
    D.verts = rt.pts;
    std::map<int, std::map<int, int>> cell_next;  // cell -> boundary successor map
    for (int t = 0; t < T; ++t) {
        if (!rt.tris[t].alive) continue;
        int g = uf.find(t);
        for (int j = 0; j < 3; ++j) {
            int u = rt.tris[t].nb[j];
            if (u >= 0 && uf.find(u) == g) continue;
            cell_next[g][rt.tris[t].v[j]] = rt.tris[t].v[(j + 1) % 3];
        }
    }
    for (auto& [g, next] : cell_next) {
        DecompFace face;
        int start = next.begin()->first;
        int cur = start;
        do {
            face.cycle.push_back(cur);
            auto it = next.find(cur);
            if (it == next.end()) fail("Internal", "cell boundary is not a closed cycle");
            cur = it->second;
        } while (cur != start && face.cycle.size() <= next.size());
        if (cur != start) fail("Internal", "cell boundary is not a closed cycle");
        QVec centroid{0, 0};
        for (int vi : face.cycle) centroid = centroid + QVec(D.verts[vi]);
        centroid = {centroid.x / int(face.cycle.size()), centroid.y / int(face.cycle.size())};
        for (std::size_t ci = 0; ci < f.poly.cuts.size(); ++ci) {
            auto tri = cut_triangle_ccw(f.poly.cuts[ci]);
            if (inside_triangle_strict(tri[0], tri[1], tri[2], centroid)) {
                face.cut = static_cast<int>(ci);
                break;
            }
        }
        D.faces.push_back(std::move(face));
    }

    D.vert_faces.assign(D.verts.size(), {});
    std::map<std::array<int, 2>, int> edge_ids;
    for (std::size_t fi = 0; fi < D.faces.size(); ++fi) {
        const auto& cyc = D.faces[fi].cycle;
        for (std::size_t k = 0; k < cyc.size(); ++k) {
            D.vert_faces[cyc[k]].push_back(static_cast<int>(fi));
            int a = cyc[k], b = cyc[(k + 1) % cyc.size()];
            std::array<int, 2> key{std::min(a, b), std::max(a, b)};
            auto [it, fresh] = edge_ids.try_emplace(key, static_cast<int>(D.edges.size()));
            if (fresh) {
                D.edges.push_back(key);
                D.edge_faces.push_back({});
            }
            D.edge_faces[it->second].push_back(static_cast<int>(fi));
        }
    }
    out.clean = true;
    return out;
}

inline bool cycles_match(std::vector<int> a, const std::vector<int>& b) {
    if (a.size() != b.size()) return false;
    auto mn = std::min_element(a.begin(), a.end());
    std::rotate(a.begin(), mn, a.end());
    std::vector<int> c = b;
    auto mnc = std::min_element(c.begin(), c.end());
    std::rotate(c.begin(), mnc, c.end());
    return a == c;
}

}  // namespace detail

inline PolyDecomp decomposition_of(const PLFunction& f) {
    auto build = detail::build_subdivision(f);
    if (!build.clean)
        fail("EpsilonTooLarge", "heights do not induce a decomposition with all pulled points as vertices");
    return std::move(build.decomp);
}

// Lower the value at v so that v becomes a vertex of the induced
// decomposition, refining only the cells whose closure contains v.
inline PLFunction pull_vertex(const PLFunction& f, const IVec& v, const Rat& eps) {
    if (sgn(eps) <= 0) fail("EpsilonTooLarge", "pull amount must be positive");
    if (locate(f.poly.mp.poly, QVec(v)) == Where::Outside)
        fail("BadPull", "pulled point " + str(v) + " lies outside the polytope");
    auto before = detail::build_subdivision(f);
    if (!before.clean) fail("BadPull", "heights are not a valid pull state");

    PLFunction g = f;
    int idx = g.find(v);
    if (idx >= 0)
        g.lifts[idx].h -= eps;
    else
        g.lifts.push_back({v, before.rt.value_at(v) - eps});

    auto after = detail::build_subdivision(g);
    if (!after.clean)
        fail("EpsilonTooLarge", "pull at " + str(v) + " buried another vertex");
    for (const auto& face : before.decomp.faces) {
        Polygon cycle;
        for (int vi : face.cycle) cycle.push_back(QVec(before.decomp.verts[vi]));
        if (locate(cycle, QVec(v)) != Where::Outside) continue;
        bool survives = false;
        for (const auto& nf : after.decomp.faces)
            if (detail::cycles_match(face.cycle, nf.cycle)) {
                survives = true;
                break;
            }
        if (!survives)
            fail("EpsilonTooLarge", "pull at " + str(v) + " changed a cell away from it");
    }
    return g;
}

namespace detail {

// Shared lowering of several points at once; used for the matched seam
// batches where the two interior edges of a cut triangle need identical
// bending values level by level.
inline PLFunction pull_matched(const PLFunction& f, const std::vector<std::pair<IVec, Int>>& drops,
                               const Rat& delta) {
    auto before = build_subdivision(f);
    if (!before.clean) fail("BadPull", "heights are not a valid pull state");
    PLFunction g = f;
    for (const auto& [p, weight] : drops) {
        int idx = g.find(p);
        if (idx >= 0)
            g.lifts[idx].h -= delta * Rat(weight);
        else
            g.lifts.push_back({p, before.rt.value_at(p) - delta * Rat(weight)});
    }
    auto after = build_subdivision(g);
    if (!after.clean) fail("EpsilonTooLarge", "matched pull buried a vertex");
    for (const auto& face : before.decomp.faces) {
        Polygon cycle;
        for (int vi : face.cycle) cycle.push_back(QVec(before.decomp.verts[vi]));
        bool touches = false;
        for (const auto& [p, weight] : drops)
            if (locate(cycle, QVec(p)) != Where::Outside) touches = true;
        if (touches) continue;
        bool survives = false;
        for (const auto& nf : after.decomp.faces)
            if (cycles_match(face.cycle, nf.cycle)) {
                survives = true;
                break;
            }
        if (!survives) fail("EpsilonTooLarge", "matched pull changed a cell away from its targets");
    }
    return g;
}

}  // namespace detail

// Cells of the standard decomposition of a cut triangle with apex at the
// origin and base vertices (a, b) and (a, c): one size-one triangle at the
// apex followed by d-1 trapezoids between consecutive levels.
inline std::vector<std::vector<IVec>> standard_cells_local(const Int& a, const Int& b, const Int& c) {
    if (a <= 0 || b <= c || a != b - c)
        fail("BadCut", "standard decomposition needs base vertices (a,b),(a,c) with b>c and a=b-c");
    Int d = gcd(a, b);  // a = b - c, so this also divides c
    IVec s0{a / d, b / d}, s1{a / d, c / d};
    std::vector<std::vector<IVec>> cells;
    cells.push_back({IVec{0, 0}, s0, s1});
    for (Int k = 1; k < d; ++k)
        cells.push_back({k * s0, (k + 1) * s0, (k + 1) * s1, k * s1});
    for (auto& cell : cells) {
        Polygon poly;
        for (const auto& p : cell) poly.push_back(QVec(p));
        if (sgn(signed_area(poly)) < 0) std::reverse(cell.begin(), cell.end());
    }
    return cells;
}

inline std::vector<std::vector<IVec>> standard_cells(const CutData& cut) {
    IVec v0 = cut.base0 - cut.apex, v1 = cut.base1 - cut.apex;
    IVec s0 = {v0.x / cut.d, v0.y / cut.d}, s1 = {v1.x / cut.d, v1.y / cut.d};
    std::vector<std::vector<IVec>> cells;
    cells.push_back({cut.apex, cut.apex + s0, cut.apex + s1});
    for (Int k = 1; k < cut.d; ++k) {
        cells.push_back({cut.apex + k * s0, cut.apex + (k + 1) * s0, cut.apex + (k + 1) * s1,
                         cut.apex + k * s1});
    }
    for (auto& cell : cells) {
        Polygon poly;
        for (const auto& p : cell) poly.push_back(QVec(p));
        if (sgn(signed_area(poly)) < 0) std::reverse(cell.begin(), cell.end());
    }
    return cells;
}

struct GoodDecomposition {
    PolyDecomp decomp;
    PLFunction phi;
};

namespace detail {

inline std::vector<IVec> pullable_points(const SymingtonPolytope& P) {
    std::vector<IVec> pts = lattice_points(P.mp.poly);
    std::vector<IVec> keep;
    for (const auto& p : pts) {
        bool skip = false;
        for (const auto& cut : P.cuts) {
            auto tri = cut_triangle_ccw(cut);
            if (inside_triangle_strict(tri[0], tri[1], tri[2], QVec(p))) skip = true;
            if (on_segment(QVec(cut.base0), QVec(cut.base1), QVec(p)) && p != cut.base0 &&
                p != cut.base1)
                skip = true;
        }
        if (!skip) keep.push_back(p);
    }
    std::sort(keep.begin(), keep.end());
    return keep;
}

}  // namespace detail

// Pulling sequence: the central point first, then per cut the three triangle
// corners as one batch plus a matched seam batch bending the interior lattice
// points of both seams identically, then the lattice points on each cut's
// invariant line walking outward from the apex, then every other lattice
// point in lexicographic order.  Pulling the invariant-line points right
// after the cut stage chains edges along that line starting at the apex, so
// the star of every apex contains its invariant direction wherever the line
// continues into the polytope.
inline GoodDecomposition good_decomposition(const SymingtonPolytope& P) {
    PLFunction f = trivial_pl(P);
    std::vector<IVec> targets = detail::pullable_points(P);
    Int vcount(targets.size());
    long step = 1;
    auto next_eps = [&]() {
        Rat maxabs(0);
        for (const auto& l : f.lifts)
            if (abs(l.h) > maxabs) maxabs = abs(l.h);
        Int K = 4 * vcount * (floor_rat(maxabs) + 1);
        return Rat(1) / Rat(boost::multiprecision::pow(K, static_cast<unsigned>(step++)));
    };
    auto pull_retry = [&](const IVec& v) {
        for (int tries = 0; tries < 64; ++tries) {
            try {
                f = pull_vertex(f, v, next_eps());
                return;
            } catch (const MirrorError& e) {
                if (e.code != "EpsilonTooLarge") throw;
            }
        }
        fail("EpsilonTooLarge", "pull schedule failed to converge at " + str(v));
    };
    auto matched_retry = [&](const std::vector<std::pair<IVec, Int>>& drops) {
        for (int tries = 0; tries < 64; ++tries) {
            try {
                f = detail::pull_matched(f, drops, next_eps());
                return;
            } catch (const MirrorError& e) {
                if (e.code != "EpsilonTooLarge") throw;
            }
        }
        fail("EpsilonTooLarge", "matched pull schedule failed to converge");
    };

    pull_retry(IVec{0, 0});
    for (const auto& cut : P.cuts) {
        // The three corners of a cut triangle drop together: lowering them one
        // at a time lets an earlier, deeper pull tilt the hull across a later
        // triangle, which then never becomes a face at any epsilon.
        matched_retry({{cut.apex, 1}, {cut.base0, 1}, {cut.base1, 1}});
        if (cut.d > 1) {
            IVec s0 = {(cut.base0 - cut.apex).x / cut.d, (cut.base0 - cut.apex).y / cut.d};
            IVec s1 = {(cut.base1 - cut.apex).x / cut.d, (cut.base1 - cut.apex).y / cut.d};
            std::vector<std::pair<IVec, Int>> drops;
            for (Int k = 1; k < cut.d; ++k) {
                Int weight = k * (2 * cut.d - k);
                drops.push_back({cut.apex + k * s0, weight});
                drops.push_back({cut.apex + k * s1, weight});
            }
            matched_retry(drops);
        }
    }
    for (const auto& cut : P.cuts) {
        for (int side : {+1, -1}) {
            IVec u = side > 0 ? cut.invariant_dir : -cut.invariant_dir;
            for (Int k = 1;; ++k) {
                IVec q = cut.apex + k * u;
                if (!std::binary_search(targets.begin(), targets.end(), q)) break;
                if (f.find(q) < 0) pull_retry(q);
            }
        }
    }
    for (const auto& p : targets)
        if (f.find(p) < 0) pull_retry(p);

    return {decomposition_of(f), std::move(f)};
}

struct GoodReport {
    bool good = true;
    std::vector<std::string> violations;
};

inline GoodReport is_good(const SymingtonPolytope& P, const PolyDecomp& D) {
    GoodReport report;
    auto blame = [&](const std::string& why) {
        report.good = false;
        report.violations.push_back(why);
    };

    Rat total(0);
    for (std::size_t fi = 0; fi < D.faces.size(); ++fi) {
        Polygon cycle;
        for (int vi : D.faces[fi].cycle) cycle.push_back(QVec(D.verts[vi]));
        total += signed_area(cycle);
        if (D.faces[fi].cut >= 0) continue;
        if (cycle.size() != 3 || signed_area(cycle) != Rat(1, 2))
            blame("face " + std::to_string(fi) + " is not a triangle of size one");
    }
    if (total != polygon_area(P.mp.poly)) blame("faces do not tile the polytope");

    for (std::size_t ci = 0; ci < P.cuts.size(); ++ci) {
        auto expected = standard_cells(P.cuts[ci]);
        std::vector<char> used(expected.size(), 0);
        std::size_t found = 0;
        for (std::size_t fi = 0; fi < D.faces.size(); ++fi) {
            if (D.faces[fi].cut != static_cast<int>(ci)) continue;
            ++found;
            std::vector<IVec> cycle;
            for (int vi : D.faces[fi].cycle) cycle.push_back(D.verts[vi]);
            bool matched = false;
            for (std::size_t k = 0; k < expected.size(); ++k) {
                if (used[k] || expected[k].size() != cycle.size()) continue;
                std::vector<IVec> a = cycle, b = expected[k];
                auto rot_min = [](std::vector<IVec>& v) {
                    auto mn = std::min_element(v.begin(), v.end());
                    std::rotate(v.begin(), mn, v.end());
                };
                rot_min(a);
                rot_min(b);
                if (a == b) {
                    used[k] = 1;
                    matched = true;
                    break;
                }
            }
            if (!matched)
                blame("face " + std::to_string(fi) + " inside cut " + std::to_string(ci) +
                      " is not a standard cell");
        }
        if (found != expected.size())
            blame("cut " + std::to_string(ci) + " has " + std::to_string(found) +
                  " cells instead of " + std::to_string(expected.size()));
    }
    return report;
}

// ---------------------------------------------------------------------------
// Dual intersection complexes.
// ---------------------------------------------------------------------------

enum class SurfaceType { Zero, One, Two };

struct DualNode {
    std::vector<int> reps;          // vertex indices of the decomposition, seam images identified
    SurfaceType type = SurfaceType::Two;
    std::vector<int> exceptional;   // cuts whose apex sits at this node
};

struct DualEdge {
    std::array<int, 2> nodes;
    bool interior = false;
    std::array<Int, 2> self_int{0, 0};  // meaningful for interior edges, aligned with nodes
};

// One spoke of the unfolded star around a node.  The walk around a node whose
// representatives sit on seams crosses into the glued chart; `chart` is the
// accumulated linear map from the chart the spoke lives in to the frame of the
// first spoke, and `dir` is the spoke direction already mapped there.
struct StarStep {
    int dual_edge = -1;  // glued dual edge this spoke crosses
    int edge = -1;       // decomposition edge realizing the spoke
    int vert = -1;       // decomposition vertex at the node end of that edge
    IVec dir;            // primitive direction in the walk frame
    Mat2 chart;          // local chart -> walk frame
    int face_next = -1;  // material face between this spoke and the next
};

struct NodeStar {
    std::vector<StarStep> steps;  // counterclockwise
    bool closed = false;
    Mat2 holonomy;  // walk frame after a full turn; identity unless seams intervene
};

// A decomposition edge lying on a cut seam, with its glued partner.
struct SeamInfo {
    int cut = -1;
    int side = 0;  // 0 = [apex, base0] side, 1 = [apex, base1] side
    Int level;     // lattice distance of the lower endpoint from the apex
    int partner_edge = -1;
};

struct DualComplex {
    std::vector<DualNode> nodes;
    std::vector<DualEdge> edges;
    std::vector<std::array<int, 3>> faces;
    int charge = 0;
    int lattice_points = 0;
    std::vector<NodeStar> stars;     // one per node
    std::vector<int> dual_edge_of;   // decomposition edge -> dual edge, -1 if immaterial
    std::vector<int> node_of_vert;   // decomposition vertex -> node
    std::map<int, SeamInfo> seams;   // decomposition edge -> seam data
};

// Self-intersection of the divisor in direction cur from the star relation
// prev + next + s * cur = 0 at a vertex with unimodular consecutive rays.
inline Int star_self_int(const IVec& prev, const IVec& cur, const IVec& next) {
    if (abs(cross(prev, cur)) != 1 || abs(cross(cur, next)) != 1)
        fail("NonUnimodularStar", "directions " + str(prev) + "," + str(cur) + "," + str(next) +
                                      " do not span unimodular wedges");
    IVec sum = prev + next;
    if (cross(sum, cur) != 0) fail("NonUnimodularStar", "star relation has no solution");
    Int s = cur.x != 0 ? -sum.x / cur.x : -sum.y / cur.y;
    if (s * cur + sum != IVec{0, 0}) fail("NonUnimodularStar", "star relation has no solution");
    return s;
}

namespace detail {

struct SeamRef {
    int cut = -1;
    int side = 0;
    Int level;
};

}  // namespace detail

inline DualComplex dual_complex(const SymingtonPolytope& P, const PolyDecomp& D) {
    int V = static_cast<int>(D.verts.size());
    std::map<IVec, int> vid;
    for (int i = 0; i < V; ++i) vid.emplace(D.verts[i], i);
    auto need = [&](const IVec& p) {
        auto it = vid.find(p);
        if (it == vid.end())
            fail("BadDecomposition", "decomposition is missing seam vertex " + str(p));
        return it->second;
    };

    detail::UnionFind classes(V);
    std::map<std::array<int, 2>, detail::SeamRef> seam_edges;
    std::vector<std::map<std::pair<int, Int>, int>> seam_edge_of(P.cuts.size());
    for (std::size_t ci = 0; ci < P.cuts.size(); ++ci) {
        const auto& cut = P.cuts[ci];
        IVec s0 = {(cut.base0 - cut.apex).x / cut.d, (cut.base0 - cut.apex).y / cut.d};
        IVec s1 = {(cut.base1 - cut.apex).x / cut.d, (cut.base1 - cut.apex).y / cut.d};
        for (Int k = 0; k <= cut.d; ++k)
            classes.unite(need(cut.apex + k * s0), need(cut.apex + k * s1));
        for (Int k = 0; k < cut.d; ++k) {
            int a0 = need(cut.apex + k * s0), a1 = need(cut.apex + (k + 1) * s0);
            int b0 = need(cut.apex + k * s1), b1 = need(cut.apex + (k + 1) * s1);
            seam_edges[{std::min(a0, a1), std::max(a0, a1)}] = {static_cast<int>(ci), 0, k};
            seam_edges[{std::min(b0, b1), std::max(b0, b1)}] = {static_cast<int>(ci), 1, k};
        }
    }

    // Material multiplicity per decomposition edge, summed across glued seams.
    std::vector<int> material_count(D.edges.size(), 0);
    for (std::size_t e = 0; e < D.edges.size(); ++e)
        for (int fi : D.edge_faces[e])
            if (D.faces[fi].cut < 0) ++material_count[e];
    for (std::size_t ci = 0; ci < P.cuts.size(); ++ci) {
        const auto& cut = P.cuts[ci];
        IVec s0 = {(cut.base0 - cut.apex).x / cut.d, (cut.base0 - cut.apex).y / cut.d};
        IVec s1 = {(cut.base1 - cut.apex).x / cut.d, (cut.base1 - cut.apex).y / cut.d};
        for (Int k = 0; k < cut.d; ++k) {
            int e0 = D.edge_id(need(cut.apex + k * s0), need(cut.apex + (k + 1) * s0));
            int e1 = D.edge_id(need(cut.apex + k * s1), need(cut.apex + (k + 1) * s1));
            if (e0 < 0 || e1 < 0) fail("BadDecomposition", "seam is not an edge union");
            seam_edge_of[ci][{0, k}] = e0;
            seam_edge_of[ci][{1, k}] = e1;
            int both = material_count[e0] + material_count[e1];
            material_count[e0] = material_count[e1] = both;
        }
    }

    // Node list: classes ordered by smallest member.
    std::map<int, int> class_node;
    DualComplex dc;
    for (int i = 0; i < V; ++i) {
        int c = classes.find(i);
        auto [it, fresh] = class_node.try_emplace(c, static_cast<int>(dc.nodes.size()));
        if (fresh) dc.nodes.push_back({});
        dc.nodes[it->second].reps.push_back(i);
    }
    auto node_of = [&](int v) { return class_node.at(classes.find(v)); };
    for (const auto& node : dc.nodes)
        if (node.reps.size() > 2)
            fail("Overlap", "three or more decomposition vertices identified together");
    for (std::size_t ci = 0; ci < P.cuts.size(); ++ci)
        dc.nodes[node_of(need(P.cuts[ci].apex))].exceptional.push_back(static_cast<int>(ci));

    // Dual edges: one per decomposition edge with material neighbors, seam
    // partners collapsing to a single edge.
    std::vector<int> dual_of(D.edges.size(), -1);
    for (std::size_t e = 0; e < D.edges.size(); ++e) {
        if (material_count[e] == 0) continue;
        std::size_t canonical = e;
        auto se = seam_edges.find(D.edges[e]);
        if (se != seam_edges.end()) {
            int partner = seam_edge_of[se->second.cut].at({1 - se->second.side, se->second.level});
            canonical = std::min(e, static_cast<std::size_t>(partner));
        }
        if (dual_of[canonical] < 0) {
            DualEdge de;
            de.nodes = {node_of(D.edges[canonical][0]), node_of(D.edges[canonical][1])};
            if (de.nodes[0] == de.nodes[1])
                fail("BadDecomposition", "double curve glued to itself");
            de.interior = material_count[canonical] == 2;
            dual_of[canonical] = static_cast<int>(dc.edges.size());
            dc.edges.push_back(de);
        }
        dual_of[e] = dual_of[canonical];
    }

    for (const auto& face : D.faces) {
        if (face.cut >= 0) continue;
        if (face.cycle.size() != 3)
            fail("BadDecomposition", "material face is not a triangle");
        dc.faces.push_back({node_of(face.cycle[0]), node_of(face.cycle[1]), node_of(face.cycle[2])});
    }

    // Wedges of material faces around each decomposition vertex: the sector
    // of a face at r runs counterclockwise from (r -> next) to (r -> prev).
    std::vector<std::map<int, std::pair<int, int>>> wedge_from(V);  // start nbr -> (end nbr, face)
    std::vector<std::set<int>> wedge_into(V);                       // end nbrs
    for (std::size_t fi = 0; fi < D.faces.size(); ++fi) {
        if (D.faces[fi].cut >= 0) continue;
        const auto& cyc = D.faces[fi].cycle;
        std::size_t m = cyc.size();
        for (std::size_t k = 0; k < m; ++k) {
            int r = cyc[k], prev = cyc[(k + m - 1) % m], next = cyc[(k + 1) % m];
            wedge_from[r][next] = {prev, static_cast<int>(fi)};
            wedge_into[r].insert(prev);
        }
    }

    auto seam_ref = [&](int a, int b) -> const detail::SeamRef* {
        auto it = seam_edges.find({std::min(a, b), std::max(a, b)});
        return it == seam_edges.end() ? nullptr : &it->second;
    };
    auto partner_end = [&](const detail::SeamRef& ref, int endpoint) {
        const auto& cut = P.cuts[ref.cut];
        IVec from = ref.side == 0 ? cut.base0 - cut.apex : cut.base1 - cut.apex;
        IVec to = ref.side == 0 ? cut.base1 - cut.apex : cut.base0 - cut.apex;
        IVec sf = {from.x / cut.d, from.y / cut.d}, st = {to.x / cut.d, to.y / cut.d};
        IVec p = D.verts[endpoint];
        Int k = sf.x != 0 ? (p - cut.apex).x / sf.x : (p - cut.apex).y / sf.y;
        return need(cut.apex + k * st);
    };

    // Star walk around a node class with unfolding across glued seams.
    auto walk = [&](int node) {
        NodeStar out;
        std::vector<std::pair<int, int>> candidates;  // (rep vertex, neighbor vertex)
        for (int r : dc.nodes[node].reps)
            for (auto& [start, rest] : wedge_from[r]) candidates.push_back({r, start});
        if (candidates.empty()) return out;
        auto has_pred = [&](int r, int u) {
            if (wedge_into[r].count(u)) return true;
            if (auto* ref = seam_ref(r, u)) {
                int r2 = partner_end(*ref, r), u2 = partner_end(*ref, u);
                if (wedge_into[r2].count(u2)) return true;
            }
            return false;
        };
        std::pair<int, int> start = candidates.front();
        bool boundary_start = false;
        for (auto& cand : candidates)
            if (!has_pred(cand.first, cand.second)) {
                start = cand;
                boundary_start = true;
                break;
            }
        if (!boundary_start) {
            // A closed walk must not begin on a state that is only reachable
            // through a seam jump: the jump skips re-emitting the partner
            // edge, so starting there would emit the pair twice.
            for (auto& cand : candidates)
                if (wedge_into[cand.first].count(cand.second)) {
                    start = cand;
                    break;
                }
        }
        Mat2 A;
        auto [r, u] = start;
        int budget = 4 * static_cast<int>(candidates.size()) + 8;
        bool first = true, completed = false;
        auto at_start = [&] { return !boundary_start && r == start.first && u == start.second; };
        auto close_walk = [&] {
            out.closed = true;
            out.holonomy = A;
            completed = true;
        };
        while (budget-- > 0) {
            // Closure can also be reached mid-iteration by a seam jump, so the
            // start state is tested both here and right after landing.
            if (!first && at_start()) {
                close_walk();
                break;
            }
            first = false;
            int e = D.edge_id(r, u);
            StarStep step;
            step.dual_edge = dual_of[e];
            step.edge = e;
            step.vert = r;
            step.dir = A.apply(primitive(D.verts[u] - D.verts[r]));
            step.chart = A;
            out.steps.push_back(step);
            auto it = wedge_from[r].find(u);
            if (it == wedge_from[r].end()) {
                auto* ref = seam_ref(r, u);
                if (!ref) {
                    completed = true;
                    break;
                }
                const auto& cut = P.cuts[ref->cut];
                int r2 = partner_end(*ref, r), u2 = partner_end(*ref, u);
                A = A * (ref->side == 0 ? cut.glue.M.inverse() : cut.glue.M);
                r = r2;
                u = u2;
                if (at_start()) {
                    auto back = wedge_from[r].find(u);
                    if (back != wedge_from[r].end()) out.steps.back().face_next = back->second.second;
                    close_walk();
                    break;
                }
                it = wedge_from[r].find(u);
                if (it == wedge_from[r].end()) {
                    completed = true;
                    break;
                }
            }
            out.steps.back().face_next = it->second.second;
            u = it->second.first;
        }
        if (!completed) fail("BadDecomposition", "star walk did not terminate");
        return out;
    };

    for (std::size_t ni = 0; ni < dc.nodes.size(); ++ni) {
        dc.stars.push_back(walk(static_cast<int>(ni)));
        const NodeStar& star = dc.stars.back();
        auto& node = dc.nodes[ni];
        std::size_t L = star.steps.size();
        if (L == 0) {
            node.type = SurfaceType::Zero;
            continue;
        }
        auto assign = [&](int dual_edge, const Int& s) {
            auto& de = dc.edges[dual_edge];
            if (de.nodes[0] == static_cast<int>(ni))
                de.self_int[0] = s;
            else
                de.self_int[1] = s;
        };
        if (star.closed) {
            node.type = SurfaceType::Two;
            for (std::size_t k = 0; k < L; ++k) {
                IVec prev = k == 0 ? star.holonomy.inverse().apply(star.steps[L - 1].dir)
                                   : star.steps[k - 1].dir;
                IVec next = k + 1 == L ? star.holonomy.apply(star.steps[0].dir)
                                       : star.steps[k + 1].dir;
                assign(star.steps[k].dual_edge, star_self_int(prev, star.steps[k].dir, next));
            }
        } else {
            node.type = cross(star.steps[0].dir, star.steps[L - 1].dir) == 0 ? SurfaceType::One
                                                                             : SurfaceType::Zero;
            for (std::size_t k = 1; k + 1 < L; ++k)
                assign(star.steps[k].dual_edge,
                       star_self_int(star.steps[k - 1].dir, star.steps[k].dir,
                                     star.steps[k + 1].dir));
        }
    }

    dc.charge = static_cast<int>(P.cuts.size());
    dc.lattice_points = static_cast<int>(dc.nodes.size());
    dc.dual_edge_of = std::move(dual_of);
    dc.node_of_vert.resize(V);
    for (int i = 0; i < V; ++i) dc.node_of_vert[i] = node_of(i);
    for (const auto& [key, ref] : seam_edges) {
        int e = D.edge_id(key[0], key[1]);
        int partner = seam_edge_of[ref.cut].at({1 - ref.side, ref.level});
        dc.seams[e] = {ref.cut, ref.side, ref.level, partner};
    }
    return dc;
}

inline int pic_rank(const DualComplex& dc) { return dc.charge + dc.lattice_points - 3; }

// ---------------------------------------------------------------------------
// STEP I fan merging around an identified vertex.
// ---------------------------------------------------------------------------

struct MergedFan {
    std::vector<Mat2> transforms;           // cumulative placement per star
    std::vector<std::vector<IVec>> placed;  // transformed star rays
    std::vector<IVec> fan;                  // asymptotic fan directions, counterclockwise
};

inline MergedFan merge_fans_step1(const std::vector<std::vector<IVec>>& stars,
                                  const std::vector<IVec>& f, const std::vector<IVec>& e) {
    std::size_t r = stars.size();
    if (r == 0 || f.size() != r || e.size() + 1 != r)
        fail("BadFanData", "need r stars, r seam directions, r-1 connecting edges");
    MergedFan out;
    Mat2 cumulative;
    for (std::size_t k = 0; k < r; ++k) {
        out.transforms.push_back(cumulative);
        std::vector<IVec> rays;
        for (const auto& ray : stars[k]) rays.push_back(cumulative.apply(ray));
        out.placed.push_back(std::move(rays));
        if (k + 1 < r) cumulative = cumulative * solve_unimodular(f[k + 1], f[k], e[k]);
    }
    std::set<IVec> seen;
    for (const auto& rays : out.placed)
        for (const auto& ray : rays) seen.insert(primitive(ray));
    out.fan.assign(seen.begin(), seen.end());
    auto half = [](const IVec& v) { return v.y > 0 || (v.y == 0 && v.x > 0) ? 0 : 1; };
    std::sort(out.fan.begin(), out.fan.end(), [&](const IVec& a, const IVec& b) {
        if (half(a) != half(b)) return half(a) < half(b);
        return cross(a, b) > 0;
    });
    return out;
}

}  // namespace mirror
