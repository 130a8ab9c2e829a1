#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <set>
#include <vector>

#include "fixtures.hpp"
#include "mirror/decomposition.hpp"
#include "test_support.hpp"

using namespace mirror;
using testsupport::error_code;

namespace {

std::vector<IVec> face_points(const PolyDecomp& D, const DecompFace& f) {
    std::vector<IVec> out;
    for (int vi : f.cycle) out.push_back(D.verts[vi]);
    return out;
}

bool same_cell(std::vector<IVec> a, std::vector<IVec> b) {
    if (a.size() != b.size()) return false;
    auto canon = [](std::vector<IVec>& v) {
        auto mn = std::min_element(v.begin(), v.end());
        std::rotate(v.begin(), mn, v.end());
    };
    canon(a);
    canon(b);
    return a == b;
}

bool has_cell(const PolyDecomp& D, std::vector<IVec> want) {
    for (const auto& f : D.faces)
        if (same_cell(face_points(D, f), want)) return true;
    return false;
}

Rat cell_area(const PolyDecomp& D, const DecompFace& f) {
    Polygon poly;
    for (int vi : f.cycle) poly.push_back(QVec(D.verts[vi]));
    return signed_area(poly);
}

// Every face of a lower hull has a supporting plane: equal to the heights on
// the face's own vertices and strictly below every other lifted point.
void check_supporting_planes(const PLFunction& f, const PolyDecomp& D) {
    std::map<IVec, Rat> height;
    for (const auto& l : f.lifts) height[l.p] = l.h;
    for (const auto& face : D.faces) {
        auto pts = face_points(D, face);
        std::size_t k = 2;
        while (k < pts.size() && cross(pts[1] - pts[0], pts[k] - pts[0]) == 0) ++k;
        REQUIRE(k < pts.size());
        IVec a = pts[0], b = pts[1], c = pts[k];
        Rat ha = height.at(a), hb = height.at(b), hc = height.at(c);
        // plane z = alpha*x + beta*y + gamma through the three lifts
        Rat det(cross(b - a, c - a));
        Rat alpha = ((hb - ha) * Rat(c.y - a.y) - (hc - ha) * Rat(b.y - a.y)) / det;
        Rat beta = (Rat(b.x - a.x) * (hc - ha) - Rat(c.x - a.x) * (hb - ha)) / det;
        Rat gamma = ha - alpha * Rat(a.x) - beta * Rat(a.y);
        std::set<IVec> on_face(pts.begin(), pts.end());
        for (const auto& l : f.lifts) {
            Rat plane = alpha * Rat(l.p.x) + beta * Rat(l.p.y) + gamma;
            if (on_face.count(l.p)) {
                REQUIRE(plane == l.h);
            } else {
                REQUIRE(plane < l.h);
            }
        }
    }
}

int node_index_with_rep(const DualComplex& dc, const PolyDecomp& D, const IVec& p) {
    for (std::size_t i = 0; i < dc.nodes.size(); ++i)
        for (int r : dc.nodes[i].reps)
            if (D.verts[r] == p) return static_cast<int>(i);
    return -1;
}

const DualEdge* edge_between(const DualComplex& dc, int a, int b) {
    for (const auto& e : dc.edges)
        if ((e.nodes[0] == a && e.nodes[1] == b) || (e.nodes[0] == b && e.nodes[1] == a)) return &e;
    return nullptr;
}

Int self_int_at(const DualEdge& e, int node) {
    return e.nodes[0] == node ? e.self_int[0] : e.self_int[1];
}

int node_index_of(const DualComplex& dc, const DualNode& n) {
    return static_cast<int>(&n - dc.nodes.data());
}

void check_dual_invariants(const DualComplex& dc) {
    int V = static_cast<int>(dc.nodes.size());
    int E = static_cast<int>(dc.edges.size());
    int F = static_cast<int>(dc.faces.size());
    CHECK(V - E + F == 1);

    int interior = 0;
    std::map<int, std::vector<int>> boundary_adj;
    bool boundary_zero = false;
    for (const auto& e : dc.edges) {
        if (e.interior) {
            ++interior;
            CHECK(e.self_int[0] + e.self_int[1] == -2);
        } else {
            boundary_adj[e.nodes[0]].push_back(e.nodes[1]);
            boundary_adj[e.nodes[1]].push_back(e.nodes[0]);
        }
    }
    CHECK(2 * E - 2 * V - interior == V - 3);

    // boundary edges form a single closed cycle through all boundary nodes
    CHECK(!boundary_adj.empty());
    for (const auto& [n, adj] : boundary_adj) CHECK(adj.size() == 2);
    std::set<int> seen;
    int start = boundary_adj.begin()->first, cur = start, prev = -1;
    while (!seen.count(cur)) {
        seen.insert(cur);
        if (dc.nodes[cur].type == SurfaceType::Zero) boundary_zero = true;
        CHECK(dc.nodes[cur].type != SurfaceType::Two);
        const auto& adj = boundary_adj.at(cur);
        int next = adj[0] == prev ? adj[1] : adj[0];
        prev = cur;
        cur = next;
    }
    CHECK(cur == start);
    CHECK(seen.size() == boundary_adj.size());
    CHECK(boundary_zero);

    for (const auto& n : dc.nodes) {
        CHECK(n.reps.size() >= 1);
        CHECK(n.reps.size() <= 2);
        if (n.type == SurfaceType::Two) CHECK(!boundary_adj.count(node_index_of(dc, n)));
    }
}

}  // namespace

TEST_CASE("pulling a corner of the unit square cuts along the diagonal") {
    SymingtonPolytope P = build_symington(fixtures::unit_square());
    PLFunction f = pull_vertex(trivial_pl(P), {0, 0}, Rat(1, 4));
    PolyDecomp D = decomposition_of(f);
    REQUIRE(D.faces.size() == 2);
    CHECK(has_cell(D, {{0, 0}, {1, 0}, {1, 1}}));
    CHECK(has_cell(D, {{0, 0}, {1, 1}, {0, 1}}));

    SECTION("pulling the same vertex again is idempotent on the decomposition") {
        PLFunction g = pull_vertex(f, {0, 0}, Rat(1, 64));
        PolyDecomp D2 = decomposition_of(g);
        REQUIRE(D2.faces.size() == 2);
        CHECK(has_cell(D2, {{0, 0}, {1, 0}, {1, 1}}));
        CHECK(has_cell(D2, {{0, 0}, {1, 1}, {0, 1}}));
    }
}

TEST_CASE("pulling a point splits only the cells containing it") {
    ToricModelInput tri2 = {{{1, 0}, {0, 1}, {-1, -1}}, {0, 0, 2}, {}};
    SymingtonPolytope P = build_symington(tri2);

    SECTION("a corner pull keeps the triangle whole") {
        PLFunction f = pull_vertex(trivial_pl(P), {0, 0}, Rat(1, 4));
        PolyDecomp D = decomposition_of(f);
        REQUIRE(D.faces.size() == 1);
        CHECK(has_cell(D, {{0, 0}, {2, 0}, {0, 2}}));
    }

    SECTION("a boundary point pull fans over the far edges") {
        PLFunction f = pull_vertex(trivial_pl(P), {1, 1}, Rat(1, 4));
        PolyDecomp D = decomposition_of(f);
        REQUIRE(D.faces.size() == 2);
        CHECK(has_cell(D, {{0, 0}, {2, 0}, {1, 1}}));
        CHECK(has_cell(D, {{0, 0}, {1, 1}, {0, 2}}));
    }
}

TEST_CASE("pull rejections") {
    SymingtonPolytope P = build_symington(fixtures::square_side(2));
    PLFunction f = trivial_pl(P);

    CHECK(error_code([&] { pull_vertex(f, {1, 1}, Rat(0)); }) == "EpsilonTooLarge");
    CHECK(error_code([&] { pull_vertex(f, {5, 5}, Rat(1, 4)); }) == "BadPull");

    PLFunction g = pull_vertex(f, {1, 1}, Rat(1, 8));
    CHECK(error_code([&] { pull_vertex(g, {2, 1}, Rat(100)); }) == "EpsilonTooLarge");
    CHECK(error_code([&] { pull_vertex(g, {2, 1}, Rat(1, 1024)); }) == "");
}

TEST_CASE("standard decomposition of a cut triangle in local coordinates") {
    SECTION("content two gives a triangle and a trapezoid") {
        auto cells = standard_cells_local(2, 2, 0);
        REQUIRE(cells.size() == 2);
        CHECK(same_cell(cells[0], {{0, 0}, {1, 0}, {1, 1}}));
        CHECK(same_cell(cells[1], {{1, 0}, {2, 0}, {2, 2}, {1, 1}}));
    }
    SECTION("content one gives a single cell") {
        auto cells = standard_cells_local(1, 1, 0);
        REQUIRE(cells.size() == 1);
        CHECK(same_cell(cells[0], {{0, 0}, {1, 0}, {1, 1}}));
    }
    SECTION("base vertices must differ from the apex height by the base length") {
        CHECK(error_code([&] { standard_cells_local(3, 6, 0); }) == "BadCut");
    }
    SECTION("content three gives two trapezoids") {
        auto cells = standard_cells_local(3, 3, 0);
        REQUIRE(cells.size() == 3);
        CHECK(same_cell(cells[0], {{0, 0}, {1, 0}, {1, 1}}));
        CHECK(same_cell(cells[1], {{1, 0}, {2, 0}, {2, 2}, {1, 1}}));
        CHECK(same_cell(cells[2], {{2, 0}, {3, 0}, {3, 3}, {2, 2}}));
    }
}

TEST_CASE("good decomposition of the one-cut projective plane") {
    SymingtonPolytope P = build_symington(fixtures::p2_one_cut());
    auto [D, phi] = good_decomposition(P);

    REQUIRE(D.faces.size() == 4);
    CHECK(has_cell(D, {{0, 0}, {0, -1}, {1, -1}}));
    CHECK(has_cell(D, {{0, -1}, {1, -2}, {1, -1}}));
    CHECK(has_cell(D, {{0, -1}, {0, -2}, {1, -2}}));
    CHECK(has_cell(D, {{1, -1}, {1, -2}, {2, -2}}));

    int cut_faces = 0;
    for (const auto& f : D.faces)
        if (f.cut == 0) {
            ++cut_faces;
            CHECK(same_cell(face_points(D, f), {{1, -1}, {1, -2}, {2, -2}}));
        }
    CHECK(cut_faces == 1);

    CHECK(is_good(P, D).good);
    check_supporting_planes(phi, D);
}

TEST_CASE("good decomposition splits a content-two cut into standard cells") {
    SymingtonPolytope P = build_symington(fixtures::square_m2_cut());
    auto [D, phi] = good_decomposition(P);

    std::vector<std::vector<IVec>> want = standard_cells(P.cuts[0]);
    REQUIRE(want.size() == 2);
    CHECK(same_cell(want[0], {{2, 1}, {3, 1}, {3, 2}}));
    CHECK(same_cell(want[1], {{3, 1}, {4, 1}, {4, 3}, {3, 2}}));
    for (const auto& cell : want) CHECK(has_cell(D, cell));

    CHECK(is_good(P, D).good);
    check_supporting_planes(phi, D);
}

TEST_CASE("good decompositions across the model corpus") {
    for (const auto& model : fixtures::model_corpus()) {
        SymingtonPolytope P = build_symington(model);
        auto [D, phi] = good_decomposition(P);

        GoodReport report = is_good(P, D);
        CHECK(report.good);
        CHECK(report.violations.empty());

        Rat total(0);
        for (const auto& f : D.faces) {
            total += cell_area(D, f);
            if (f.cut < 0) {
                CHECK(f.cycle.size() == 3);
                CHECK(cell_area(D, f) == Rat(1, 2));
            }
        }
        CHECK(total == polygon_area(P.mp.poly));

        check_supporting_planes(phi, D);
    }
}

TEST_CASE("non-good decompositions are reported with violations") {
    SECTION("the undivided unit square is not triangulated") {
        SymingtonPolytope P = build_symington(fixtures::unit_square());
        PolyDecomp D = decomposition_of(trivial_pl(P));
        GoodReport report = is_good(P, D);
        CHECK_FALSE(report.good);
        CHECK(!report.violations.empty());
    }
    SECTION("empty triangles of size two are rejected") {
        ToricModelInput tri2 = {{{1, 0}, {0, 1}, {-1, -1}}, {0, 0, 2}, {}};
        SymingtonPolytope P = build_symington(tri2);
        PolyDecomp D = decomposition_of(pull_vertex(trivial_pl(P), {1, 1}, Rat(1, 4)));
        // both cells are lattice triangles of area one with no interior points
        GoodReport report = is_good(P, D);
        CHECK_FALSE(report.good);
        CHECK(!report.violations.empty());
    }
}

TEST_CASE("dual complex of the bare unit triangle") {
    SymingtonPolytope P = build_symington(fixtures::unit_triangle());
    PolyDecomp D = decomposition_of(trivial_pl(P));
    DualComplex dc = dual_complex(P, D);

    REQUIRE(dc.nodes.size() == 3);
    REQUIRE(dc.edges.size() == 3);
    REQUIRE(dc.faces.size() == 1);
    for (const auto& n : dc.nodes) CHECK(n.type == SurfaceType::Zero);
    for (const auto& e : dc.edges) CHECK_FALSE(e.interior);
    CHECK(dc.lattice_points == 3);
    CHECK(pic_rank(dc) == 0);
    check_dual_invariants(dc);
}

TEST_CASE("dual complex of the unit square with a diagonal") {
    SymingtonPolytope P = build_symington(fixtures::unit_square());
    PolyDecomp D = decomposition_of(pull_vertex(trivial_pl(P), {0, 0}, Rat(1, 4)));
    DualComplex dc = dual_complex(P, D);

    REQUIRE(dc.nodes.size() == 4);
    REQUIRE(dc.edges.size() == 5);
    REQUIRE(dc.faces.size() == 2);
    int a = node_index_with_rep(dc, D, {0, 0});
    int b = node_index_with_rep(dc, D, {1, 1});
    const DualEdge* diag = edge_between(dc, a, b);
    REQUIRE(diag != nullptr);
    CHECK(diag->interior);
    CHECK(self_int_at(*diag, a) == -1);
    CHECK(self_int_at(*diag, b) == -1);
    CHECK(pic_rank(dc) == 1);
    check_dual_invariants(dc);
}

TEST_CASE("dual complex of the one-cut projective plane") {
    SymingtonPolytope P = build_symington(fixtures::p2_one_cut());
    auto [D, phi] = good_decomposition(P);
    DualComplex dc = dual_complex(P, D);

    REQUIRE(dc.nodes.size() == 5);
    REQUIRE(dc.edges.size() == 7);
    REQUIRE(dc.faces.size() == 3);
    CHECK(dc.lattice_points == 5);
    CHECK(dc.charge == 1);
    CHECK(pic_rank(dc) == 3);

    int a = node_index_with_rep(dc, D, {0, 0});
    int b = node_index_with_rep(dc, D, {0, -1});
    int c = node_index_with_rep(dc, D, {0, -2});
    int x = node_index_with_rep(dc, D, {1, -1});
    int d0 = node_index_with_rep(dc, D, {1, -2});
    CHECK(d0 == node_index_with_rep(dc, D, {2, -2}));
    REQUIRE(dc.nodes[d0].reps.size() == 2);

    CHECK(dc.nodes[a].type == SurfaceType::Zero);
    CHECK(dc.nodes[b].type == SurfaceType::One);
    CHECK(dc.nodes[c].type == SurfaceType::Zero);
    CHECK(dc.nodes[x].type == SurfaceType::Zero);
    CHECK(dc.nodes[d0].type == SurfaceType::Zero);

    CHECK(dc.nodes[x].exceptional == std::vector<int>{0});
    for (int n : {a, b, c, d0}) CHECK(dc.nodes[n].exceptional.empty());

    const DualEdge* bx = edge_between(dc, b, x);
    REQUIRE(bx != nullptr);
    CHECK(bx->interior);
    CHECK(self_int_at(*bx, b) == -1);
    CHECK(self_int_at(*bx, x) == -1);

    const DualEdge* bd0 = edge_between(dc, b, d0);
    REQUIRE(bd0 != nullptr);
    CHECK(bd0->interior);
    CHECK(self_int_at(*bd0, b) == -1);
    CHECK(self_int_at(*bd0, d0) == -1);

    for (auto [u, v] : std::vector<std::pair<int, int>>{{a, b}, {b, c}, {c, d0}, {d0, x}, {x, a}}) {
        const DualEdge* e = edge_between(dc, u, v);
        REQUIRE(e != nullptr);
        CHECK_FALSE(e->interior);
    }
    check_dual_invariants(dc);
}

TEST_CASE("dual complex of the two-cut square") {
    SymingtonPolytope P = build_symington(fixtures::square_two_cut());
    auto [D, phi] = good_decomposition(P);
    DualComplex dc = dual_complex(P, D);

    CHECK(dc.lattice_points == 14);
    CHECK(dc.charge == 2);
    CHECK(pic_rank(dc) == 13);

    int apex0 = node_index_with_rep(dc, D, {2, 1});
    int apex1 = node_index_with_rep(dc, D, {1, 2});
    CHECK(dc.nodes[apex0].type == SurfaceType::Two);
    CHECK(dc.nodes[apex1].type == SurfaceType::Two);
    CHECK(dc.nodes[apex0].exceptional == std::vector<int>{0});
    CHECK(dc.nodes[apex1].exceptional == std::vector<int>{1});

    int base0 = node_index_with_rep(dc, D, {3, 1});
    CHECK(base0 == node_index_with_rep(dc, D, {3, 2}));
    int base1 = node_index_with_rep(dc, D, {2, 3});
    CHECK(base1 == node_index_with_rep(dc, D, {1, 3}));

    check_dual_invariants(dc);
}

TEST_CASE("dual complex of a content-two cut identifies both seam levels") {
    SymingtonPolytope P = build_symington(fixtures::square_m2_cut());
    auto [D, phi] = good_decomposition(P);
    DualComplex dc = dual_complex(P, D);

    CHECK(dc.lattice_points == 22);
    CHECK(pic_rank(dc) == 20);

    int seam = node_index_with_rep(dc, D, {3, 1});
    CHECK(seam == node_index_with_rep(dc, D, {3, 2}));
    CHECK(dc.nodes[seam].type == SurfaceType::Two);

    int base = node_index_with_rep(dc, D, {4, 1});
    CHECK(base == node_index_with_rep(dc, D, {4, 3}));

    int apex = node_index_with_rep(dc, D, {2, 1});
    CHECK(dc.nodes[apex].exceptional == std::vector<int>{0});
    CHECK(dc.nodes[apex].type == SurfaceType::Two);

    check_dual_invariants(dc);
}

TEST_CASE("dual complexes across the model corpus") {
    for (const auto& model : fixtures::model_corpus()) {
        SymingtonPolytope P = build_symington(model);
        auto [D, phi] = good_decomposition(P);
        DualComplex dc = dual_complex(P, D);
        check_dual_invariants(dc);
        CHECK(dc.charge == static_cast<int>(model.cuts.size()));
        int exceptional_total = 0;
        for (const auto& n : dc.nodes) exceptional_total += static_cast<int>(n.exceptional.size());
        CHECK(exceptional_total == dc.charge);
    }
}

TEST_CASE("non-unimodular stars are rejected") {
    ToricModelInput rect = {{{1, 0}, {0, 1}, {-1, 0}, {0, -1}}, {0, 0, 1, 2}, {}};
    SymingtonPolytope P = build_symington(rect);
    PolyDecomp D = decomposition_of(pull_vertex(trivial_pl(P), {0, 0}, Rat(1, 4)));
    REQUIRE(D.faces.size() == 2);  // diagonal from (0,0) to (1,2)
    CHECK(error_code([&] { dual_complex(P, D); }) == "NonUnimodularStar");
}

TEST_CASE("merging stars along a chain of identified edges") {
    SECTION("worked three-star chain") {
        std::vector<IVec> f = {{0, 1}, {-1, 1}, {-1, 0}};
        std::vector<IVec> e = {{1, 0}, {0, 1}};
        std::vector<std::vector<IVec>> stars = {
            {{0, 1}, {1, 0}},
            {{-1, 1}, {1, 0}, {0, 1}},
            {{-1, 0}, {0, 1}},
        };
        MergedFan merged = merge_fans_step1(stars, f, e);
        REQUIRE(merged.transforms.size() == 3);
        CHECK(merged.transforms[0] == Mat2{1, 0, 0, 1});
        CHECK(merged.transforms[1] == Mat2{1, 1, 0, 1});
        CHECK(merged.transforms[2] == Mat2{0, 1, -1, 1});
        // the second step transform alone
        Mat2 t2 = merged.transforms[1].inverse() * merged.transforms[2];
        CHECK(t2 == Mat2{1, 0, -1, 1});
        // each seam direction lands on the first one
        CHECK(merged.transforms[1].apply(f[1]) == f[0]);
        CHECK(merged.transforms[2].apply(f[2]) == merged.transforms[1].apply(f[1]));
        CHECK(std::vector<IVec>{{1, 0}, {1, 1}, {0, 1}} == merged.fan);
    }
    SECTION("a single star is returned unchanged") {
        std::vector<std::vector<IVec>> stars = {{{1, 0}, {0, 1}, {-1, -1}}};
        MergedFan merged = merge_fans_step1(stars, {{0, 1}}, {});
        REQUIRE(merged.transforms.size() == 1);
        CHECK(merged.transforms[0] == Mat2{1, 0, 0, 1});
        CHECK(merged.fan.size() == 3);
    }
    SECTION("two stars share exactly the seam ray and the fixed edge") {
        std::vector<std::vector<IVec>> stars = {
            {{0, -1}, {1, 0}, {0, 1}},
            {{1, 0}, {-1, 1}, {-1, 0}},
        };
        MergedFan merged = merge_fans_step1(stars, {{0, 1}, {-1, 1}}, {{1, 0}});
        CHECK(merged.transforms[1] == Mat2{1, 1, 0, 1});
        CHECK(merged.fan.size() == 4);  // 3 + 3 - 2
    }
    SECTION("inconsistent data is rejected") {
        CHECK(error_code([&] { merge_fans_step1({}, {}, {}); }) == "BadFanData");
        CHECK(error_code([&] {
                  merge_fans_step1({{{1, 0}}, {{0, 1}}}, {{1, 0}, {-1, 0}}, {{1, 0}});
              }) == "NoUnimodularSolution");
    }
}
