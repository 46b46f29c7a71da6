#pragma once

// Max-margin structured loss over contours and its subgradients with
// respect to the four energy maps. Node-indexed terms are splatted onto the
// pixel grid with bilinear coefficients, which is the exact derivative of
// the bilinearly sampled energy (the integer-coordinate Iverson bracket is
// the special case). Also houses the SGD/Adam parameter update.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "dsac/energy.hpp"
#include "dsac/geometry.hpp"
#include "dsac/grid.hpp"

namespace dsac {

struct LossReport {
    double hinge = 0.0;       // max(0, task_loss - E(y_hat) + E(gt))
    double task_loss = 0.0;   // 1 - IoU(y_hat, gt)
    double energy_gt = 0.0;
    double energy_hat = 0.0;
    bool margin_violated = false;
};

struct MapGradients {
    Grid dD;
    Grid dBeta;
    Grid dKappa;
    Grid dAlpha_grid;            // when alpha_local
    double dAlpha_scalar = 0.0;  // when !alpha_local
    bool alpha_local = false;

    static MapGradients zeros(int U, int V, bool alpha_local) {
        MapGradients g;
        g.dD = Grid(U, V);
        g.dBeta = Grid(U, V);
        g.dKappa = Grid(U, V);
        g.alpha_local = alpha_local;
        if (alpha_local) g.dAlpha_grid = Grid(U, V);
        return g;
    }
};

inline LossReport hinge_loss(const EnergyMaps& maps, const Contour& gt, const Contour& y_hat) {
    LossReport r;
    r.task_loss = 1.0 - iou(y_hat, gt, maps.width(), maps.height());
    r.energy_gt = total_energy(maps, gt);
    r.energy_hat = total_energy(maps, y_hat);
    const double raw = r.task_loss - r.energy_hat + r.energy_gt;
    r.margin_violated = raw > 0.0;
    r.hinge = std::max(0.0, raw);
    return r;
}

// Deposit one weight per node onto the grid; conserves total mass.
inline Grid splat_nodes(const Contour& c, const std::vector<double>& weights, int U, int V) {
    if (static_cast<int>(weights.size()) != c.size())
        throw std::invalid_argument("splat_nodes: weights length must equal node count");
    Grid g(U, V);
    for (int s = 0; s < c.size(); ++s)
        splat_bilinear(g, c.nodes[static_cast<size_t>(s)], weights[static_cast<size_t>(s)]);
    return g;
}

inline std::vector<double> first_diff_sq(const Contour& c) {
    std::vector<double> w(static_cast<size_t>(c.size()));
    for (int s = 0; s < c.size(); ++s) {
        const Vec2 d = c.at(s + 1) - c.at(s);
        w[static_cast<size_t>(s)] = d.dot(d);
    }
    return w;
}

inline std::vector<double> second_diff_sq(const Contour& c) {
    std::vector<double> w(static_cast<size_t>(c.size()));
    for (int s = 0; s < c.size(); ++s) {
        const Vec2 d = c.at(s + 1) - c.at(s) * 2.0 + c.at(s - 1);
        w[static_cast<size_t>(s)] = d.dot(d);
    }
    return w;
}

// Subgradients of the active hinge w.r.t. D, alpha, beta, kappa. All-zero
// when the margin is satisfied. The kappa gradient is the difference of the
// two region masks with the sign that matches the negative balloon term in
// the energy: descent lowers kappa where y_hat overshoots the ground truth.
inline MapGradients loss_subgradients(const EnergyMaps& maps, const Contour& gt,
                                      const Contour& y_hat, const LossReport& report) {
    const int U = maps.width(), V = maps.height();
    MapGradients g = MapGradients::zeros(U, V, maps.alpha_local);
    if (!report.margin_violated) return g;

    const std::vector<double> ones_gt(static_cast<size_t>(gt.size()), 1.0);
    const std::vector<double> ones_hat(static_cast<size_t>(y_hat.size()), 1.0);
    const Grid sD_gt = splat_nodes(gt, ones_gt, U, V);
    const Grid sD_hat = splat_nodes(y_hat, ones_hat, U, V);
    for (size_t i = 0; i < g.dD.data.size(); ++i) g.dD.data[i] = sD_gt.data[i] - sD_hat.data[i];

    const Grid sA_gt = splat_nodes(gt, first_diff_sq(gt), U, V);
    const Grid sA_hat = splat_nodes(y_hat, first_diff_sq(y_hat), U, V);
    if (maps.alpha_local) {
        for (size_t i = 0; i < g.dAlpha_grid.data.size(); ++i)
            g.dAlpha_grid.data[i] = sA_gt.data[i] - sA_hat.data[i];
    } else {
        g.dAlpha_scalar = grid_sum(sA_gt) - grid_sum(sA_hat);
    }

    const Grid sB_gt = splat_nodes(gt, second_diff_sq(gt), U, V);
    const Grid sB_hat = splat_nodes(y_hat, second_diff_sq(y_hat), U, V);
    for (size_t i = 0; i < g.dBeta.data.size(); ++i) g.dBeta.data[i] = sB_gt.data[i] - sB_hat.data[i];

    const RasterMask m_gt = rasterize(gt, U, V);
    const RasterMask m_hat = rasterize(y_hat, U, V);
    for (size_t i = 0; i < g.dKappa.data.size(); ++i)
        g.dKappa.data[i] = static_cast<double>(m_hat.inside[i]) - static_cast<double>(m_gt.inside[i]);

    return g;
}

inline MapGradients loss_subgradients(const EnergyMaps& maps, const Contour& gt,
                                      const Contour& y_hat) {
    return loss_subgradients(maps, gt, y_hat, hinge_loss(maps, gt, y_hat));
}

// ---------------------------------------------------------------------------
// Parameter update

struct OptimConfig {
    enum class Kind { sgd, adam };
    Kind kind = Kind::adam;
    double lr = 1e-4;
    double l2 = 1e-4;  // weight decay, the 1/2 ||w||^2 regularizer
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Updates a set of flat float tensors from double gradients. Adam keeps
// per-tensor first/second moment state; the tensor list must be presented
// in the same order on every call.
class Optimizer {
public:
    explicit Optimizer(OptimConfig cfg) : cfg_(cfg) {}

    const OptimConfig& config() const { return cfg_; }
    void set_lr(double lr) { cfg_.lr = lr; }

    void step(const std::vector<std::vector<float>*>& params,
              const std::vector<const std::vector<double>*>& grads) {
        if (params.size() != grads.size())
            throw std::invalid_argument("Optimizer::step: params/grads count mismatch");
        if (cfg_.kind == OptimConfig::Kind::adam && m_.size() != params.size()) {
            m_.assign(params.size(), {});
            v_.assign(params.size(), {});
            for (size_t t = 0; t < params.size(); ++t) {
                m_[t].assign(params[t]->size(), 0.0);
                v_[t].assign(params[t]->size(), 0.0);
            }
            t_ = 0;
        }
        ++t_;
        for (size_t t = 0; t < params.size(); ++t) {
            std::vector<float>& p = *params[t];
            const std::vector<double>& g = *grads[t];
            if (p.size() != g.size())
                throw std::invalid_argument("Optimizer::step: tensor size mismatch");
            if (cfg_.kind == OptimConfig::Kind::sgd) {
                for (size_t i = 0; i < p.size(); ++i) {
                    const double gi = g[i] + cfg_.l2 * static_cast<double>(p[i]);
                    p[i] = static_cast<float>(static_cast<double>(p[i]) - cfg_.lr * gi);
                }
            } else {
                const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
                const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
                for (size_t i = 0; i < p.size(); ++i) {
                    const double gi = g[i] + cfg_.l2 * static_cast<double>(p[i]);
                    m_[t][i] = cfg_.beta1 * m_[t][i] + (1.0 - cfg_.beta1) * gi;
                    v_[t][i] = cfg_.beta2 * v_[t][i] + (1.0 - cfg_.beta2) * gi * gi;
                    const double mh = m_[t][i] / bc1;
                    const double vh = v_[t][i] / bc2;
                    p[i] = static_cast<float>(static_cast<double>(p[i]) -
                                              cfg_.lr * mh / (std::sqrt(vh) + cfg_.eps));
                }
            }
        }
    }

    void reset() {
        m_.clear();
        v_.clear();
        t_ = 0;
    }

private:
    OptimConfig cfg_;
    std::vector<std::vector<double>> m_, v_;
    long t_ = 0;
};

}  // namespace dsac
