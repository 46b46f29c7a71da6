#pragma once

// Closed-polygon primitives: signed area, scanline rasterization, IoU,
// circle initialization and equal-arc-length resampling. Everything here is
// a pure function on value types; coordinates are (u, v) with u = column,
// v = row, origin at the top-left pixel center.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dsac {

struct Vec2 {
    double u = 0.0;
    double v = 0.0;

    Vec2() = default;
    Vec2(double u_, double v_) : u(u_), v(v_) {}

    Vec2 operator+(const Vec2& o) const { return {u + o.u, v + o.v}; }
    Vec2 operator-(const Vec2& o) const { return {u - o.u, v - o.v}; }
    Vec2 operator*(double k) const { return {u * k, v * k}; }
    double dot(const Vec2& o) const { return u * o.u + v * o.v; }
    double norm() const { return std::sqrt(u * u + v * v); }
};

// Closed polygon with L ordered nodes; node L-1 connects back to node 0.
struct Contour {
    std::vector<Vec2> nodes;

    Contour() = default;
    explicit Contour(std::vector<Vec2> n) : nodes(std::move(n)) {}

    int size() const { return static_cast<int>(nodes.size()); }

    // Circular access: s may be any integer, it wraps modulo L.
    const Vec2& at(int s) const {
        const int L = size();
        return nodes[static_cast<size_t>(((s % L) + L) % L)];
    }
    Vec2& at(int s) {
        const int L = size();
        return nodes[static_cast<size_t>(((s % L) + L) % L)];
    }
};

inline void check_contour(const Contour& c) {
    if (c.size() < 4)
        throw std::invalid_argument("contour must have at least 4 nodes, got " +
                                    std::to_string(c.size()));
}

// Boolean occupancy grid over a U x V pixel lattice.
struct RasterMask {
    int width = 0;   // U
    int height = 0;  // V
    std::vector<uint8_t> inside;

    RasterMask() = default;
    RasterMask(int U, int V) : width(U), height(V), inside(static_cast<size_t>(U) * V, 0) {}

    uint8_t at(int u, int v) const { return inside[static_cast<size_t>(v) * width + u]; }
    uint8_t& at(int u, int v) { return inside[static_cast<size_t>(v) * width + u]; }

    long count() const {
        long n = 0;
        for (uint8_t b : inside) n += b;
        return n;
    }
};

// Shoelace formula, 1/2 sum_s (u_s v_{s+1} - u_{s+1} v_s), circular indexing.
// Positive for counter-clockwise node order in the (u right, v down) frame.
inline double signed_area(const Contour& c) {
    check_contour(c);
    const int L = c.size();
    double acc = 0.0;
    for (int s = 0; s < L; ++s) {
        const Vec2& a = c.nodes[static_cast<size_t>(s)];
        const Vec2& b = c.at(s + 1);
        acc += a.u * b.v - b.u * a.v;
    }
    return 0.5 * acc;
}

inline double perimeter(const Contour& c) {
    check_contour(c);
    const int L = c.size();
    double acc = 0.0;
    for (int s = 0; s < L; ++s) acc += (c.at(s + 1) - c.nodes[static_cast<size_t>(s)]).norm();
    return acc;
}

// Even-odd test of a single pixel center against the polygon, casting a ray
// toward +u. The half-open rule (v1 <= j < v2) makes the fill total even for
// self-intersecting input. rasterize() below must agree with this predicate
// exactly; tests compare the two.
inline bool point_in_polygon(const Contour& c, double pu, double pv) {
    const int L = c.size();
    bool in = false;
    for (int s = 0; s < L; ++s) {
        const Vec2& a = c.nodes[static_cast<size_t>(s)];
        const Vec2& b = c.at(s + 1);
        if ((a.v <= pv && pv < b.v) || (b.v <= pv && pv < a.v)) {
            const double t = (pv - a.v) / (b.v - a.v);
            const double ucross = a.u + t * (b.u - a.u);
            if (pu < ucross) in = !in;
        }
    }
    return in;
}

// Scanline even-odd fill at pixel centers (a pixel is inside iff its center
// is). Deterministic: identical contours give identical masks.
inline RasterMask rasterize(const Contour& c, int U, int V) {
    check_contour(c);
    if (U <= 0 || V <= 0) throw std::invalid_argument("rasterize: empty grid");
    RasterMask mask(U, V);
    const int L = c.size();
    std::vector<double> crossings;
    crossings.reserve(static_cast<size_t>(L));
    for (int j = 0; j < V; ++j) {
        crossings.clear();
        const double pv = static_cast<double>(j);
        for (int s = 0; s < L; ++s) {
            const Vec2& a = c.nodes[static_cast<size_t>(s)];
            const Vec2& b = c.at(s + 1);
            if ((a.v <= pv && pv < b.v) || (b.v <= pv && pv < a.v)) {
                const double t = (pv - a.v) / (b.v - a.v);
                crossings.push_back(a.u + t * (b.u - a.u));
            }
        }
        if (crossings.empty()) continue;
        std::sort(crossings.begin(), crossings.end());
        // Inside spans are half-open [x_{2k}, x_{2k+1}): a center sitting
        // exactly on the left crossing is inside, on the right one outside,
        // matching point_in_polygon's strict "pu < ucross" count.
        for (size_t k = 0; k + 1 < crossings.size(); k += 2) {
            const double c0 = crossings[k], c1 = crossings[k + 1];
            int lo = static_cast<int>(std::ceil(c0));
            int hi = (std::floor(c1) == c1) ? static_cast<int>(c1) - 1
                                            : static_cast<int>(std::floor(c1));
            lo = std::max(lo, 0);
            hi = std::min(hi, U - 1);
            for (int i = lo; i <= hi; ++i) mask.at(i, j) = 1;
        }
    }
    return mask;
}

inline double mask_iou(const RasterMask& a, const RasterMask& b) {
    if (a.width != b.width || a.height != b.height)
        throw std::invalid_argument("mask_iou: dimension mismatch");
    long inter = 0, uni = 0;
    for (size_t i = 0; i < a.inside.size(); ++i) {
        const bool ia = a.inside[i] != 0, ib = b.inside[i] != 0;
        inter += (ia && ib);
        uni += (ia || ib);
    }
    if (uni == 0) return 1.0;  // both empty: agreement
    return static_cast<double>(inter) / static_cast<double>(uni);
}

inline double iou(const Contour& a, const Contour& b, int U, int V) {
    return mask_iou(rasterize(a, U, V), rasterize(b, U, V));
}

inline Vec2 clamp_to_bounds(Vec2 p, int U, int V) {
    p.u = std::clamp(p.u, 0.0, static_cast<double>(U - 1));
    p.v = std::clamp(p.v, 0.0, static_cast<double>(V - 1));
    return p;
}

// L nodes equally spaced on a circle, counter-clockwise, clamped to the
// image rectangle when bounds are given (U, V <= 0 disables clamping).
inline Contour init_circle(Vec2 seed, double radius, int L, int U = 0, int V = 0) {
    if (radius <= 0.0) throw std::invalid_argument("init_circle: radius must be positive");
    if (L < 4) throw std::invalid_argument("init_circle: L must be at least 4");
    Contour c;
    c.nodes.reserve(static_cast<size_t>(L));
    for (int k = 0; k < L; ++k) {
        const double th = 2.0 * M_PI * static_cast<double>(k) / static_cast<double>(L);
        Vec2 p{seed.u + radius * std::cos(th), seed.v + radius * std::sin(th)};
        if (U > 0 && V > 0) p = clamp_to_bounds(p, U, V);
        c.nodes.push_back(p);
    }
    return c;
}

// Resample a closed polygon to L nodes at equal arc-length spacing,
// starting from the original node 0. Orientation is preserved.
inline Contour resample_closed(const Contour& c, int L) {
    check_contour(c);
    if (L < 4) throw std::invalid_argument("resample_closed: L must be at least 4");
    const int n = c.size();
    std::vector<double> cum(static_cast<size_t>(n) + 1, 0.0);
    for (int s = 0; s < n; ++s)
        cum[static_cast<size_t>(s) + 1] =
            cum[static_cast<size_t>(s)] + (c.at(s + 1) - c.nodes[static_cast<size_t>(s)]).norm();
    const double total = cum[static_cast<size_t>(n)];
    if (total <= 0.0) return Contour(std::vector<Vec2>(static_cast<size_t>(L), c.nodes[0]));
    Contour out;
    out.nodes.reserve(static_cast<size_t>(L));
    int seg = 0;
    for (int k = 0; k < L; ++k) {
        const double target = total * static_cast<double>(k) / static_cast<double>(L);
        while (seg + 1 < n && cum[static_cast<size_t>(seg) + 1] < target) ++seg;
        const double len = cum[static_cast<size_t>(seg) + 1] - cum[static_cast<size_t>(seg)];
        const double t = len > 0.0 ? (target - cum[static_cast<size_t>(seg)]) / len : 0.0;
        const Vec2& a = c.nodes[static_cast<size_t>(seg)];
        const Vec2& b = c.at(seg + 1);
        out.nodes.push_back(a + (b - a) * t);
    }
    return out;
}

// Reverses into counter-clockwise (positive signed area) order if needed.
inline Contour ensure_ccw(Contour c) {
    if (signed_area(c) < 0.0) std::reverse(c.nodes.begin(), c.nodes.end());
    return c;
}

inline Vec2 centroid(const Contour& c) {
    check_contour(c);
    Vec2 acc;
    for (const Vec2& p : c.nodes) acc = acc + p;
    return acc * (1.0 / static_cast<double>(c.size()));
}

}  // namespace dsac
