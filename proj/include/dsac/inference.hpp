#pragma once

// Semi-implicit contour evolution
//
//   y^{t+1} = (I + A + B)^{-1} (y^t + gamma * F),   F = data + balloon force
//
// where the internal terms are treated implicitly (one small linear solve
// per step) and the external forces explicitly. Also provides the
// loss-augmented variant used during max-margin training.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "dsac/energy.hpp"
#include "dsac/geometry.hpp"

namespace dsac {

struct InferenceConfig {
    int iterations = 50;
    double step_gamma = 1.0;  // step scale on the external force
    bool clamp = true;
    bool record_trajectory = false;
};

struct Trajectory {
    std::vector<Contour> contours;  // iterations + 1 entries, includes the initial state
    std::vector<double> energies;
};

// One evolution step. A and B are rebuilt from the map values at the
// current node positions; the factorization is shared by both coordinate
// columns. Throws if the system is singular or produces non-finite nodes.
inline Contour acm_step(const EnergyMaps& maps, const Contour& c, const InferenceConfig& cfg) {
    check_contour(c);
    if (cfg.iterations < 1) throw std::invalid_argument("InferenceConfig: iterations must be >= 1");
    const int L = c.size();
    const ForceSet fs = compute_forces(maps, c);

    Matrix M(L, L);
    for (int r = 0; r < L; ++r)
        for (int k = 0; k < L; ++k) M.at(r, k) = fs.A.at(r, k) + fs.B.at(r, k);
    for (int r = 0; r < L; ++r) M.at(r, r) += 1.0;

    std::vector<double> rhs_u(static_cast<size_t>(L)), rhs_v(static_cast<size_t>(L));
    for (int s = 0; s < L; ++s) {
        const Vec2 F = fs.data_force[static_cast<size_t>(s)] + fs.balloon_force[static_cast<size_t>(s)];
        rhs_u[static_cast<size_t>(s)] = c.nodes[static_cast<size_t>(s)].u + cfg.step_gamma * F.u;
        rhs_v[static_cast<size_t>(s)] = c.nodes[static_cast<size_t>(s)].v + cfg.step_gamma * F.v;
    }

    const LuFactors lu = lu_factor(std::move(M));
    const std::vector<double> nu = lu_solve(lu, rhs_u);
    const std::vector<double> nv = lu_solve(lu, rhs_v);

    Contour out;
    out.nodes.resize(static_cast<size_t>(L));
    for (int s = 0; s < L; ++s) {
        Vec2 p{nu[static_cast<size_t>(s)], nv[static_cast<size_t>(s)]};
        if (!std::isfinite(p.u) || !std::isfinite(p.v))
            throw std::runtime_error("acm_step: non-finite node after solve");
        if (cfg.clamp) p = clamp_to_bounds(p, maps.width(), maps.height());
        out.nodes[static_cast<size_t>(s)] = p;
    }
    return out;
}

inline Contour run_inference(const EnergyMaps& maps, const Contour& init,
                             const InferenceConfig& cfg, Trajectory* traj = nullptr) {
    Contour c = init;
    if (traj) {
        traj->contours.clear();
        traj->energies.clear();
        traj->contours.push_back(c);
        traj->energies.push_back(total_energy(maps, c));
    }
    for (int t = 0; t < cfg.iterations; ++t) {
        c = acm_step(maps, c, cfg);
        if (traj) {
            traj->contours.push_back(c);
            traj->energies.push_back(total_energy(maps, c));
        }
    }
    return c;
}

// kappa' = kappa - c_delta inside the ground truth + c_delta outside it:
// inference on the shifted map seeks the most-violating contour for the
// IoU task loss.
inline Grid augment_kappa(const Grid& kappa, const RasterMask& gt, double c_delta) {
    if (kappa.width != gt.width || kappa.height != gt.height)
        throw std::invalid_argument("augment_kappa: kappa/mask dimension mismatch");
    Grid out = kappa;
    for (int v = 0; v < out.height; ++v)
        for (int u = 0; u < out.width; ++u)
            out.at(u, v) += gt.at(u, v) ? -c_delta : c_delta;
    return out;
}

inline Contour run_loss_augmented(const EnergyMaps& maps, const Contour& init,
                                  const RasterMask& gt, double c_delta,
                                  const InferenceConfig& cfg, Trajectory* traj = nullptr) {
    if (c_delta < 0.0) throw std::invalid_argument("run_loss_augmented: c_delta must be >= 0");
    if (c_delta == 0.0) return run_inference(maps, init, cfg, traj);
    EnergyMaps aug = maps;
    aug.kappa = augment_kappa(maps.kappa, gt, c_delta);
    return run_inference(aug, init, cfg, traj);
}

}  // namespace dsac
