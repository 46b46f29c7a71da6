#pragma once

// Dense U x V scalar field with clamped bilinear sampling, the exact
// derivative of the sampled surface, and its adjoint (bilinear splatting).

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "dsac/geometry.hpp"

namespace dsac {

struct Grid {
    int width = 0;   // U
    int height = 0;  // V
    std::vector<double> data;  // row-major, index v * width + u

    Grid() = default;
    Grid(int U, int V, double fill = 0.0)
        : width(U), height(V), data(static_cast<size_t>(U) * V, fill) {
        if (U <= 0 || V <= 0) throw std::invalid_argument("Grid: dimensions must be positive");
    }

    double at(int u, int v) const { return data[static_cast<size_t>(v) * width + u]; }
    double& at(int u, int v) { return data[static_cast<size_t>(v) * width + u]; }
    size_t size() const { return data.size(); }

    bool same_shape(const Grid& o) const { return width == o.width && height == o.height; }
};

namespace detail {

struct BilinearCell {
    int i, j;        // lower-left lattice corner
    double a, b;     // fractional offsets in u, v
};

inline BilinearCell locate(const Grid& g, Vec2 p) {
    double u = std::clamp(p.u, 0.0, static_cast<double>(g.width - 1));
    double v = std::clamp(p.v, 0.0, static_cast<double>(g.height - 1));
    int i = static_cast<int>(std::floor(u));
    int j = static_cast<int>(std::floor(v));
    i = std::min(i, g.width - 2);
    j = std::min(j, g.height - 2);
    i = std::max(i, 0);
    j = std::max(j, 0);
    return {i, j, u - i, v - j};
}

}  // namespace detail

// Bilinear interpolation of the four surrounding pixel centers; out-of-range
// points are clamped to the border.
inline double sample_bilinear(const Grid& g, Vec2 p) {
    if (g.width < 2 || g.height < 2) return g.data[0];
    const auto [i, j, a, b] = detail::locate(g, p);
    const double d00 = g.at(i, j), d10 = g.at(i + 1, j);
    const double d01 = g.at(i, j + 1), d11 = g.at(i + 1, j + 1);
    return (1.0 - a) * (1.0 - b) * d00 + a * (1.0 - b) * d10 +
           (1.0 - a) * b * d01 + a * b * d11;
}

// Exact gradient of the piecewise-bilinear surface at p (in-cell derivative,
// not a lattice finite difference). Matches a small-step central difference
// of sample_bilinear anywhere off the cell boundaries.
inline Vec2 bilinear_gradient(const Grid& g, Vec2 p) {
    if (g.width < 2 || g.height < 2) return {0.0, 0.0};
    const auto [i, j, a, b] = detail::locate(g, p);
    const double d00 = g.at(i, j), d10 = g.at(i + 1, j);
    const double d01 = g.at(i, j + 1), d11 = g.at(i + 1, j + 1);
    return {(1.0 - b) * (d10 - d00) + b * (d11 - d01),
            (1.0 - a) * (d01 - d00) + a * (d11 - d10)};
}

// Adjoint of sample_bilinear: deposits w onto the four pixels surrounding p
// with the same bilinear coefficients. Total deposited mass equals w.
inline void splat_bilinear(Grid& g, Vec2 p, double w) {
    if (g.width < 2 || g.height < 2) {
        g.data[0] += w;
        return;
    }
    const auto [i, j, a, b] = detail::locate(g, p);
    g.at(i, j) += (1.0 - a) * (1.0 - b) * w;
    g.at(i + 1, j) += a * (1.0 - b) * w;
    g.at(i, j + 1) += (1.0 - a) * b * w;
    g.at(i + 1, j + 1) += a * b * w;
}

inline double grid_sum(const Grid& g) {
    double s = 0.0;
    for (double x : g.data) s += x;
    return s;
}

inline double grid_mean(const Grid& g) {
    return grid_sum(g) / static_cast<double>(g.size());
}

}  // namespace dsac
