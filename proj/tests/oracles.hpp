#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "mirror/polygon.hpp"

namespace oracles {

using namespace mirror;

// Sutherland-Hodgman clip of a convex polygon by the half plane <m,v> >= -c.
inline Polygon clip_halfplane(const Polygon& poly, IVec v, const Rat& c) {
    auto side = [&](const QVec& q) { return q.x * v.x + q.y * v.y + c; };
    Polygon out;
    std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        QVec a = poly[i], b = poly[(i + 1) % n];
        Rat sa = side(a), sb = side(b);
        if (sa >= 0) out.push_back(a);
        if ((sa > 0 && sb < 0) || (sa < 0 && sb > 0)) {
            Rat t = sa / (sa - sb);
            out.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
        }
    }
    // drop consecutive duplicates
    Polygon clean;
    for (const auto& q : out)
        if (clean.empty() || !(clean.back() == q)) clean.push_back(q);
    if (clean.size() > 1 && clean.front() == clean.back()) clean.pop_back();
    return clean;
}

// Independent construction of {m : <m,v_i> >= -c_i} by clipping a huge box.
inline Polygon halfplane_polygon(const std::vector<IVec>& rays, const std::vector<Int>& cs) {
    Int big = 1;
    for (const auto& c : cs) big += abs(c) * 16 + 16;
    Polygon poly = {{-big, -big}, {big, -big}, {big, big}, {-big, big}};
    for (std::size_t i = 0; i < rays.size(); ++i) {
        poly = clip_halfplane(poly, rays[i], Rat(cs[i]));
        if (poly.size() < 3) return {};
    }
    return poly;
}

// Same vertex cycle up to rotation (both CCW).
inline bool same_cycle(const Polygon& a, const Polygon& b) {
    if (a.size() != b.size()) return false;
    std::size_t n = a.size();
    for (std::size_t shift = 0; shift < n; ++shift) {
        bool ok = true;
        for (std::size_t i = 0; i < n && ok; ++i) ok = a[i] == b[(i + shift) % n];
        if (ok) return true;
    }
    return false;
}

// Brute-force local scattering solver: rays through the origin carry series
// with free class labels, a full counterclockwise loop is composed as one
// substitution automorphism per crossed ray, and residual terms of the loop
// are cancelled greedily, lowest class degree first, by adding a term to the
// ray opposite the residual's monomial shift.  No wall supports, no joints,
// no grouping: everything is global series algebra, so it is an independent
// check of a scattering engine's output around a single point.
namespace brute {

using Cls = std::vector<Int>;

struct Key {
    IVec m;
    Cls b;
    friend bool operator==(const Key& x, const Key& y) = default;
    friend bool operator<(const Key& x, const Key& y) {
        if (!(x.m == y.m)) return x.m < y.m;
        return x.b < y.b;
    }
};

using Ser = std::map<Key, Rat>;

struct Solver {
    int nlabels = 0;
    Int cap = 2;
    std::map<IVec, Ser> rays;   // primitive direction -> nonconstant part of its function
    std::map<IVec, Ser> added;  // solver-created terms, same layout

    static Int degree(const Cls& b) {
        Int d = 0;
        for (const auto& x : b) d += x;
        return d;
    }

    // A line through the origin: the same function sits on both rays.
    void add_line(const IVec& dir, const IVec& m, const Cls& beta, const Rat& c) {
        rays[dir][{m, beta}] += c;
        rays[-dir][{m, beta}] += c;
    }

    Ser mul(const Ser& A, const Ser& B) const {
        Ser out;
        for (const auto& [ka, ca] : A)
            for (const auto& [kb, cb] : B) {
                if (degree(ka.b) + degree(kb.b) > cap) continue;
                Cls b = ka.b;
                for (std::size_t i = 0; i < b.size(); ++i) b[i] += kb.b[i];
                Rat& slot = out[{ka.m + kb.m, b}];
                slot += ca * cb;
                if (slot == 0) out.erase({ka.m + kb.m, b});
            }
        return out;
    }

    // (1 + F)^h truncated, h any integer; F has positive class degree in
    // every term, so the series stabilizes past the cap.
    Ser pow(const Ser& F, const Int& h) const {
        Ser one{{{IVec{0, 0}, Cls(nlabels, Int(0))}, Rat(1)}};
        Ser out = one, term = one;
        Rat binom(1);
        for (Int j = 1; j <= cap + 1; ++j) {
            binom *= Rat(h - j + 1) / Rat(j);
            term = mul(term, F);
            if (term.empty()) break;
            if (binom == 0) break;
            for (const auto& [k, c] : term) {
                Rat& slot = out[k];
                slot += binom * c;
                if (slot == 0) out.erase(k);
            }
        }
        return out;
    }

    // Crossing the ray of direction d: z^q -> z^q f^{<n,q>}, n = (d.y, -d.x).
    Ser cross_ray(const Ser& in, const IVec& d, const Ser& fminus1) const {
        IVec n{d.y, -d.x};
        Ser out;
        std::map<Int, Ser> cache;
        for (const auto& [key, c] : in) {
            Int h = dot(n, key.m);
            auto it = cache.find(h);
            if (it == cache.end()) it = cache.emplace(h, pow(fminus1, h)).first;
            for (const auto& [gk, gc] : it->second) {
                if (degree(key.b) + degree(gk.b) > cap) continue;
                Cls b = key.b;
                for (std::size_t i = 0; i < b.size(); ++i) b[i] += gk.b[i];
                Rat& slot = out[{key.m + gk.m, b}];
                slot += c * gc;
                if (slot == 0) out.erase({key.m + gk.m, b});
            }
        }
        return out;
    }

    Ser ray_function(const IVec& d) const {
        Ser f;
        if (auto it = rays.find(d); it != rays.end()) f = it->second;
        if (auto it = added.find(d); it != added.end())
            for (const auto& [k, c] : it->second) {
                Rat& slot = f[k];
                slot += c;
                if (slot == 0) f.erase(k);
            }
        return f;
    }

    Ser loop(const IVec& q) const {
        std::vector<IVec> dirs;
        for (const auto& [d, f] : rays) dirs.push_back(d);
        for (const auto& [d, f] : added)
            if (!f.empty() && !rays.count(d)) dirs.push_back(d);
        auto half = [](const IVec& v) { return v.y < 0 || (v.y == 0 && v.x < 0) ? 1 : 0; };
        std::sort(dirs.begin(), dirs.end(), [&](const IVec& x, const IVec& y) {
            if (half(x) != half(y)) return half(x) < half(y);
            return cross(x, y) > 0;
        });
        Ser s{{{q, Cls(nlabels, Int(0))}, Rat(1)}};
        for (const IVec& d : dirs) s = cross_ray(s, d, ray_function(d));
        return s;
    }

    Ser residual(const IVec& q) const {
        Ser s = loop(q);
        Key id{q, Cls(nlabels, Int(0))};
        Rat& slot = s[id];
        slot -= 1;
        if (slot == 0) s.erase(id);
        return s;
    }

    bool consistent() const {
        return residual(IVec{1, 0}).empty() && residual(IVec{0, 1}).empty();
    }

    // Greedy completion; returns false if the fixpoint iteration ran away.
    bool solve(int rounds = 256) {
        for (int it = 0; it < rounds; ++it) {
            bool fixed = false;
            for (const IVec& q : {IVec{1, 0}, IVec{0, 1}}) {
                Ser res = residual(q);
                std::optional<Key> best;
                for (const auto& [k, c] : res) {
                    IVec s = k.m - q;
                    IVec rd = -primitive(s);
                    if (dot(IVec{rd.y, -rd.x}, q) == 0) continue;
                    if (!best || std::make_pair(degree(k.b), k) <
                                     std::make_pair(degree(best->b), *best))
                        best = k;
                }
                if (!best) continue;
                Rat c = res[*best];
                IVec s = best->m - q;
                IVec rd = -primitive(s);
                Int h = dot(IVec{rd.y, -rd.x}, q);
                Rat& slot = added[rd][{s, best->b}];
                slot -= c / Rat(h);
                if (slot == 0) added[rd].erase({s, best->b});
                fixed = true;
                break;
            }
            if (!fixed) return consistent();
        }
        return false;
    }
};

}  // namespace brute

}  // namespace oracles
