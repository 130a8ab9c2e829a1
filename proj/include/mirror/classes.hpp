#pragma once

#include <string>
#include <vector>

#include "mirror/decomposition.hpp"

namespace mirror {

// Labels generating the curve classes of the glued surface: one label [C_e]
// per interior double curve, then one exceptional label per cut.  Identities
// between classes are not encoded here; they are recovered by pairing against
// the component divisors (see intersection_pairing).
struct ClassBasis {
    int curve_count = 0;
    int cut_count = 0;
    std::vector<int> label_of_dual_edge;  // -1 for boundary dual edges
    std::vector<int> dual_edge_of_label;  // inverse, curve labels only

    int size() const { return curve_count + cut_count; }
    int exceptional_label(int cut) const { return curve_count + cut; }
    std::string label_name(int lbl) const {
        if (lbl < curve_count) return "C" + std::to_string(dual_edge_of_label[lbl]);
        return "E" + std::to_string(lbl - curve_count);
    }
};

inline ClassBasis class_basis(const DualComplex& dc) {
    ClassBasis b;
    b.cut_count = dc.charge;
    b.label_of_dual_edge.assign(dc.edges.size(), -1);
    for (std::size_t e = 0; e < dc.edges.size(); ++e) {
        if (!dc.edges[e].interior) continue;
        b.label_of_dual_edge[e] = b.curve_count++;
        b.dual_edge_of_label.push_back(static_cast<int>(e));
    }
    return b;
}

// Decomposition edge meeting the exceptional curve of a cut: the edge at the
// apex along the monodromy-invariant line.  When both invariant neighbors are
// present the -invariant_dir side is taken, so the choice is deterministic.
inline int attachment_edge(const SymingtonPolytope& P, const PolyDecomp& D, const DualComplex& dc,
                           int cut) {
    const CutData& cd = P.cuts[cut];
    std::map<IVec, int> vid;
    for (std::size_t i = 0; i < D.verts.size(); ++i) vid.emplace(D.verts[i], static_cast<int>(i));
    auto at = vid.find(cd.apex);
    if (at == vid.end()) fail("Internal", "apex is not a decomposition vertex");
    for (const IVec& u : {-cd.invariant_dir, cd.invariant_dir}) {
        auto nb = vid.find(cd.apex + u);
        if (nb == vid.end()) continue;
        int e = D.edge_id(at->second, nb->second);
        if (e >= 0 && dc.dual_edge_of[e] >= 0) return e;
    }
    fail("UnalignedSingularity",
         "no decomposition edge at apex " + str(cd.apex) + " along the invariant direction");
}

// Degrees of the label classes on the component divisors: rows indexed by
// dual-complex nodes, columns by class labels.  For a double curve C_e the
// degree on an end component equals the self-intersection of C_e inside the
// opposite component, plus one for each triangle hanging on e at a third
// node.  An exceptional curve meets its own component in -1 and crosses the
// double curve of the attachment edge once.
inline std::vector<std::vector<Int>> intersection_pairing(const SymingtonPolytope& P,
                                                          const PolyDecomp& D,
                                                          const DualComplex& dc,
                                                          const ClassBasis& basis) {
    std::vector<std::vector<Int>> M(dc.nodes.size(), std::vector<Int>(basis.size(), Int(0)));
    for (int l = 0; l < basis.curve_count; ++l) {
        const DualEdge& de = dc.edges[basis.dual_edge_of_label[l]];
        M[de.nodes[0]][l] += de.self_int[1];
        M[de.nodes[1]][l] += de.self_int[0];
        for (const auto& face : dc.faces)
            for (int k = 0; k < 3; ++k) {
                int a = face[k], b = face[(k + 1) % 3], c = face[(k + 2) % 3];
                if ((a == de.nodes[0] && b == de.nodes[1]) ||
                    (a == de.nodes[1] && b == de.nodes[0]))
                    M[c][l] += 1;
            }
    }
    std::map<IVec, int> vid;
    for (std::size_t i = 0; i < D.verts.size(); ++i) vid.emplace(D.verts[i], static_cast<int>(i));
    for (int ci = 0; ci < dc.charge; ++ci) {
        int l = basis.exceptional_label(ci);
        int apex_node = dc.node_of_vert[vid.at(P.cuts[ci].apex)];
        M[apex_node][l] -= 1;
        const DualEdge& de = dc.edges[dc.dual_edge_of[attachment_edge(P, D, dc, ci)]];
        int other = de.nodes[0] == apex_node ? de.nodes[1] : de.nodes[0];
        if (de.nodes[0] != apex_node && de.nodes[1] != apex_node)
            fail("Internal", "attachment edge does not touch the apex node");
        M[other][l] += 1;
    }
    return M;
}

}  // namespace mirror
