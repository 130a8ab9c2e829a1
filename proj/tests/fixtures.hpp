#pragma once

#include <vector>

#include "mirror/model.hpp"
#include "mirror/symington.hpp"

namespace fixtures {

using namespace mirror;

// Projective plane with degree-2 polarization and one size-1 cut on the edge
// dual to (0,1).  In these coordinates the central point is the origin; the
// usual first-quadrant picture conv{(0,0),(2,0),(0,2)} is shifted by (0,-2),
// putting the apex at (1,-1) and the cut base at [(1,-2),(2,-2)].
inline ToricModelInput p2_one_cut() {
    return {{{1, 0}, {0, 1}, {-1, -1}}, {0, 2, 0}, {Cut{1, 1, 1}}};
}

inline IVec p2_shift() { return {0, 2}; }  // add to match the first-quadrant picture

// [0,3]^2 with one cut on the right edge (apex (2,1)) and one on the top edge
// (apex (1,2)); their invariant lines cross at (2,2).
inline ToricModelInput square_two_cut() {
    return {{{1, 0}, {0, 1}, {-1, 0}, {0, -1}}, {0, 0, 3, 3}, {Cut{2, 1, 1}, Cut{3, 1, 1}}};
}

// [0,4]^2 with a size-2 cut; the apex-to-base vectors have content 2, so the
// standard decomposition of the cut triangle contains a trapezoid.
inline ToricModelInput square_m2_cut() {
    return {{{1, 0}, {0, 1}, {-1, 0}, {0, -1}}, {0, 0, 4, 4}, {Cut{2, 2, 1}}};
}

inline ToricModelInput unit_square() {
    return {{{1, 0}, {0, 1}, {-1, 0}, {0, -1}}, {0, 0, 1, 1}, {}};
}

inline ToricModelInput unit_triangle() {
    return {{{1, 0}, {0, 1}, {-1, -1}}, {0, 0, 1}, {}};
}

inline ToricModelInput square_side(long long n) {
    return {{{1, 0}, {0, 1}, {-1, 0}, {0, -1}}, {0, 0, Int(n), Int(n)}, {}};
}

// Triangle of side 2 with an interior lattice point at height 1 over the base
// (cone over the degree-1 del Pezzo pattern is overkill; this is the smallest
// cut-free polygon with an interior point).
inline ToricModelInput p2_degree3() {
    return {{{1, 0}, {0, 1}, {-1, -1}}, {0, 0, 3}, {}};
}

// A deterministic corpus of valid cut models across several base shapes.
inline std::vector<ToricModelInput> model_corpus(std::size_t want = 24) {
    std::vector<ToricModelInput> shapes = {
        {{{1, 0}, {0, 1}, {-1, -1}}, {0, 2, 0}, {}},
        {{{1, 0}, {0, 1}, {-1, -1}}, {0, 3, 0}, {}},
        {{{1, 0}, {0, 1}, {-1, -1}}, {2, 2, 2}, {}},
        {{{1, 0}, {0, 1}, {-1, 0}, {0, -1}}, {0, 0, 3, 3}, {}},
        {{{1, 0}, {0, 1}, {-1, 0}, {0, -1}}, {0, 0, 4, 2}, {}},
        {{{1, 0}, {0, 1}, {-1, 0}, {0, -1}}, {1, 1, 3, 3}, {}},
        {{{1, 0}, {0, 1}, {-1, 0}, {0, -1}}, {0, 0, 4, 4}, {}},
        {{{1, 0}, {0, 1}, {-1, 1}, {0, -1}}, {0, 0, 2, 3}, {}},
        {{{1, 0}, {0, 1}, {-1, 1}, {0, -1}}, {1, 0, 3, 2}, {}},
        {{{1, 0}, {1, 1}, {0, 1}, {-1, 0}, {0, -1}}, {0, 1, 1, 3, 3}, {}},
    };
    std::vector<ToricModelInput> out;
    for (const auto& shape : shapes) {
        for (int edge = 0; edge < static_cast<int>(shape.rays.size()) && out.size() < want; ++edge) {
            for (Int size = 1; size <= 2 && out.size() < want; ++size) {
                for (Int offset = 0; offset <= 2 && out.size() < want; ++offset) {
                    ToricModelInput m = shape;
                    m.cuts.push_back(Cut{edge, size, offset});
                    try {
                        (void)build_symington(m);
                    } catch (const MirrorError&) {
                        continue;
                    }
                    out.push_back(m);
                }
            }
        }
    }
    // a couple of two-cut models
    std::vector<ToricModelInput> extra = {square_two_cut(),
                                          {{{1, 0}, {0, 1}, {-1, 0}, {0, -1}},
                                           {0, 0, 4, 4},
                                           {Cut{2, 1, 0}, Cut{2, 1, 2}}},
                                          square_m2_cut()};
    for (const auto& m : extra) {
        try {
            (void)build_symington(m);
            out.push_back(m);
        } catch (const MirrorError&) {
        }
    }
    return out;
}

}  // namespace fixtures
