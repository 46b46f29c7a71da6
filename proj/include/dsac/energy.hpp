#pragma once

// The four contour energy terms and their force (steepest descent) forms:
//
//   E(y) = sum_s [ D(y_s) + alpha_s |y'_s|^2 + beta_s |y''_s|^2 ]
//          - sum_{(u,v) in Omega(y)} kappa(u,v)
//
// with first/second differences y'_s = y_{s+1} - y_s and
// y''_s = y_{s+1} - 2 y_s + y_{s-1}, circular indexing, node spacing 1.
// The balloon term enters with a minus sign so that minimizing E maximizes
// the kappa mass enclosed by the contour; positive kappa inflates.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "dsac/geometry.hpp"
#include "dsac/grid.hpp"
#include "dsac/linalg.hpp"

namespace dsac {

// Per-pixel energy maps produced by a predictor. alpha is either a single
// scalar (paper default) or a full grid; beta and kappa are always stored as
// grids, a "scalar" mode simply broadcasts one value into them upstream.
struct EnergyMaps {
    Grid D;
    Grid beta;
    Grid kappa;
    Grid alpha_grid;            // valid when alpha_local
    double alpha_scalar = 0.0;  // valid when !alpha_local
    bool alpha_local = false;
    bool beta_local = true;
    bool kappa_local = true;

    int width() const { return D.width; }
    int height() const { return D.height; }

    double alpha_at(Vec2 p) const {
        return alpha_local ? sample_bilinear(alpha_grid, p) : alpha_scalar;
    }

    static EnergyMaps zeros(int U, int V) {
        EnergyMaps m;
        m.D = Grid(U, V);
        m.beta = Grid(U, V);
        m.kappa = Grid(U, V);
        m.alpha_scalar = 0.0;
        m.alpha_local = false;
        return m;
    }
};

// Internal-force matrices: A cyclic tri-diagonal from the membrane weights,
// B cyclic penta-diagonal from the thin-plate weights, assembled so that
// dE_int/dy = (A + B) y for the nodal samples passed in.
struct ForceSet {
    std::vector<Vec2> data_force;
    std::vector<Vec2> balloon_force;
    Matrix A;
    Matrix B;
};

inline std::vector<double> sample_alpha_at_nodes(const EnergyMaps& m, const Contour& c) {
    std::vector<double> out(static_cast<size_t>(c.size()));
    for (int s = 0; s < c.size(); ++s) out[static_cast<size_t>(s)] = m.alpha_at(c.nodes[static_cast<size_t>(s)]);
    return out;
}

inline std::vector<double> sample_beta_at_nodes(const EnergyMaps& m, const Contour& c) {
    std::vector<double> out(static_cast<size_t>(c.size()));
    for (int s = 0; s < c.size(); ++s)
        out[static_cast<size_t>(s)] = sample_bilinear(m.beta, c.nodes[static_cast<size_t>(s)]);
    return out;
}

// Membrane + thin-plate energy for frozen nodal weights.
inline double internal_energy(const std::vector<double>& alpha_s,
                              const std::vector<double>& beta_s, const Contour& c) {
    const int L = c.size();
    double acc = 0.0;
    for (int s = 0; s < L; ++s) {
        const Vec2 d1 = c.at(s + 1) - c.at(s);
        const Vec2 d2 = c.at(s + 1) - c.at(s) * 2.0 + c.at(s - 1);
        acc += alpha_s[static_cast<size_t>(s)] * d1.dot(d1) +
               beta_s[static_cast<size_t>(s)] * d2.dot(d2);
    }
    return acc;
}

// Assemble A(alpha) and B(beta) from nodal samples with circular wrap.
// Row s of A:  2 [ -a_{s-1},  a_{s-1}+a_s,  -a_s ]           at s-1, s, s+1
// Row s of B:  2 [ b_{s-1}, -2b_s-2b_{s-1}, b_{s-1}+4b_s+b_{s+1},
//                  -2b_{s+1}-2b_s, b_{s+1} ]                  at s-2 .. s+2
inline std::pair<Matrix, Matrix> internal_matrices(const std::vector<double>& alpha_s,
                                                   const std::vector<double>& beta_s) {
    const int L = static_cast<int>(alpha_s.size());
    if (static_cast<int>(beta_s.size()) != L)
        throw std::invalid_argument("internal_matrices: alpha/beta length mismatch");
    for (int s = 0; s < L; ++s) {
        if (alpha_s[static_cast<size_t>(s)] < 0.0 || beta_s[static_cast<size_t>(s)] < 0.0)
            throw std::invalid_argument("internal_matrices: negative membrane or thin-plate weight");
    }
    auto wrap = [L](int s) { return ((s % L) + L) % L; };
    Matrix A(L, L), B(L, L);
    for (int s = 0; s < L; ++s) {
        const double am = alpha_s[static_cast<size_t>(wrap(s - 1))];
        const double a0 = alpha_s[static_cast<size_t>(s)];
        A.at(s, wrap(s - 1)) += -2.0 * am;
        A.at(s, s) += 2.0 * (am + a0);
        A.at(s, wrap(s + 1)) += -2.0 * a0;

        const double bm = beta_s[static_cast<size_t>(wrap(s - 1))];
        const double b0 = beta_s[static_cast<size_t>(s)];
        const double bp = beta_s[static_cast<size_t>(wrap(s + 1))];
        B.at(s, wrap(s - 2)) += 2.0 * bm;
        B.at(s, wrap(s - 1)) += 2.0 * (-2.0 * b0 - 2.0 * bm);
        B.at(s, s) += 2.0 * (bm + 4.0 * b0 + bp);
        B.at(s, wrap(s + 1)) += 2.0 * (-2.0 * bp - 2.0 * b0);
        B.at(s, wrap(s + 2)) += 2.0 * bp;
    }
    return {std::move(A), std::move(B)};
}

inline std::pair<Matrix, Matrix> internal_matrices(const EnergyMaps& m, const Contour& c) {
    return internal_matrices(sample_alpha_at_nodes(m, c), sample_beta_at_nodes(m, c));
}

// Steepest-descent data force: minus the exact gradient of the bilinear
// surface through D, evaluated per node.
inline std::vector<Vec2> data_force(const Grid& D, const Contour& c) {
    std::vector<Vec2> f(static_cast<size_t>(c.size()));
    for (int s = 0; s < c.size(); ++s) {
        const Vec2 g = bilinear_gradient(D, c.nodes[static_cast<size_t>(s)]);
        f[static_cast<size_t>(s)] = {-g.u, -g.v};
    }
    return f;
}

// u^T C v with C cyclic tri-diagonal (0 main, +1 super, -1 sub). Equals
// twice the shoelace signed area.
inline double shoelace_energy(const Contour& c) {
    check_contour(c);
    const int L = c.size();
    double acc = 0.0;
    for (int s = 0; s < L; ++s)
        acc += c.nodes[static_cast<size_t>(s)].u * (c.at(s + 1).v - c.at(s - 1).v);
    return acc;
}

// E_k: kappa mass over the rasterized interior.
inline double balloon_energy(const Grid& kappa, const Contour& c) {
    const RasterMask mask = rasterize(c, kappa.width, kappa.height);
    double acc = 0.0;
    for (int v = 0; v < kappa.height; ++v)
        for (int u = 0; u < kappa.width; ++u)
            if (mask.at(u, v)) acc += kappa.at(u, v);
    return acc;
}

namespace detail {

// (1/H) * integral_0^H h * kappa(line(anchor - h)) dh along the axis line
// through the node, by composite trapezoid with ceil(|H|)+1 samples. Exact
// for constant kappa; the H -> 0 limit is 0.
inline double trapezoid_moment(const Grid& kappa, const Vec2& node, double anchor, double H,
                               bool vertical) {
    const double ah = std::abs(H);
    if (ah < 1e-12) return 0.0;
    const int samples = static_cast<int>(std::ceil(ah)) + 1;
    const double dh = H / static_cast<double>(samples - 1);
    double acc = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double h = dh * static_cast<double>(i);
        const Vec2 p = vertical ? Vec2{node.u, anchor - h} : Vec2{anchor - h, node.v};
        const double f = h * sample_bilinear(kappa, p);
        acc += (i == 0 || i == samples - 1) ? 0.5 * f : f;
    }
    return acc * dh / H;
}

}  // namespace detail

// dE_k/dy_s via the swept-trapezoid construction: perturbing node s sweeps
// two triangles against the previous and next node. kappa is sampled along
// the axis line through the node. For constant kappa = c this reduces to
// (c/2) * n_s with n_s = [v_{s+1}-v_{s-1}, u_{s-1}-u_{s+1}], the outward
// normal of a counter-clockwise contour, so positive kappa inflates.
inline std::vector<Vec2> balloon_force(const Grid& kappa, const Contour& c) {
    check_contour(c);
    const int L = c.size();
    std::vector<Vec2> f(static_cast<size_t>(L));
    for (int s = 0; s < L; ++s) {
        const Vec2& prev = c.at(s - 1);
        const Vec2& cur = c.nodes[static_cast<size_t>(s)];
        const Vec2& next = c.at(s + 1);
        const double du = -detail::trapezoid_moment(kappa, cur, prev.v, prev.v - cur.v, true) +
                          detail::trapezoid_moment(kappa, cur, next.v, next.v - cur.v, true);
        const double dv = detail::trapezoid_moment(kappa, cur, prev.u, prev.u - cur.u, false) -
                          detail::trapezoid_moment(kappa, cur, next.u, next.u - cur.u, false);
        f[static_cast<size_t>(s)] = {du, dv};
    }
    return f;
}

inline ForceSet compute_forces(const EnergyMaps& m, const Contour& c) {
    ForceSet fs;
    fs.data_force = data_force(m.D, c);
    fs.balloon_force = balloon_force(m.kappa, c);
    auto [A, B] = internal_matrices(m, c);
    fs.A = std::move(A);
    fs.B = std::move(B);
    return fs;
}

// Full Eq.-style energy; the balloon contribution is negative (enclosed
// kappa mass is rewarded).
inline double total_energy(const EnergyMaps& m, const Contour& c) {
    check_contour(c);
    double acc = 0.0;
    for (int s = 0; s < c.size(); ++s)
        acc += sample_bilinear(m.D, c.nodes[static_cast<size_t>(s)]);
    acc += internal_energy(sample_alpha_at_nodes(m, c), sample_beta_at_nodes(m, c), c);
    acc -= balloon_energy(m.kappa, c);
    return acc;
}

}  // namespace dsac
