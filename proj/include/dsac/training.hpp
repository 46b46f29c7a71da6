#pragma once

// Max-margin training loop: per instance, predictor forward, loss-augmented
// ACM inference for the most violated contour, map subgradients, exact
// backpropagation, optimizer step. Non-finite values abort with a
// diagnostic dump instead of being skipped.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "dsac/config.hpp"
#include "dsac/dataset.hpp"
#include "dsac/inference.hpp"
#include "dsac/predictor.hpp"
#include "dsac/serialize.hpp"
#include "dsac/ssvm.hpp"

namespace dsac {

struct TrainStats {
    std::vector<double> epoch_mean_hinge;
    std::vector<double> epoch_mean_task_loss;
    long steps = 0;
};

struct TrainResult {
    std::unique_ptr<Predictor> shared;                      // convnet
    std::vector<std::unique_ptr<Predictor>> per_instance;   // directgrid, aligned with data
    std::vector<std::string> instance_ids;
    TrainStats stats;
};

namespace detail {

// 90-degree lattice rotations and flips of a square (patch, polygons) pair.
// k in [0, 8): low two bits = quarter turns, bit 2 = mirror in u first.
inline Vec2 rot_point(Vec2 p, int k, int S) {
    if (k & 4) p.u = static_cast<double>(S - 1) - p.u;
    for (int r = 0; r < (k & 3); ++r) p = {static_cast<double>(S - 1) - p.v, p.u};
    return p;
}

inline Instance transform_instance(const Instance& in, int k) {
    if (k == 0 || in.patch.width != in.patch.height) return in;
    const int S = in.patch.width;
    Instance out = in;
    for (int c = 0; c < in.patch.channels; ++c)
        for (int v = 0; v < S; ++v)
            for (int u = 0; u < S; ++u) {
                const Vec2 d = rot_point({static_cast<double>(u), static_cast<double>(v)}, k, S);
                out.patch.at(c, static_cast<int>(d.v), static_cast<int>(d.u)) =
                    in.patch.at(c, v, u);
            }
    for (Vec2& p : out.gt.nodes) p = rot_point(p, k, S);
    for (Vec2& p : out.init.nodes) p = rot_point(p, k, S);
    out.gt = ensure_ccw(std::move(out.gt));
    out.init = ensure_ccw(std::move(out.init));
    return out;
}

inline void check_finite_maps(const EnergyMaps& m) {
    auto bad = [](const Grid& g) {
        for (double v : g.data)
            if (!std::isfinite(v)) return true;
        return false;
    };
    if (bad(m.D) || bad(m.beta) || bad(m.kappa) ||
        (m.alpha_local ? bad(m.alpha_grid) : !std::isfinite(m.alpha_scalar)))
        throw std::runtime_error("predictor produced non-finite energy maps");
}

inline nlohmann::json contour_json(const Contour& c) {
    nlohmann::json n = nlohmann::json::array();
    for (const Vec2& p : c.nodes) n.push_back({p.u, p.v});
    return n;
}

}  // namespace detail

// Subgradient of one instance's hinge term. The most violated constraint is
// approximated by two ACM runs, one on the loss-augmented kappa and one
// plain; the candidate with the larger Delta(y) - E(y) wins. (The plain
// result is itself a feasible, frequently violating contour that the
// augmented run can miss entirely.)
inline LossReport compute_ssvm_grads(Predictor& pred, const Patch& patch, const Contour& gt_L,
                                     const Contour& init_L, const RasterMask& gt_mask,
                                     const RunConfig& cfg, GradSet& grads_out) {
    ForwardResult fwd = pred.forward_train(patch);
    detail::check_finite_maps(fwd.maps);

    const Contour y_aug =
        run_loss_augmented(fwd.maps, init_L, gt_mask, cfg.c_delta, cfg.inference_config());
    const Contour y_plain = run_inference(fwd.maps, init_L, cfg.inference_config());
    const LossReport rep_aug = hinge_loss(fwd.maps, gt_L, y_aug);
    const LossReport rep_plain = hinge_loss(fwd.maps, gt_L, y_plain);
    const bool use_aug = rep_aug.task_loss - rep_aug.energy_hat >=
                         rep_plain.task_loss - rep_plain.energy_hat;
    const Contour& y_hat = use_aug ? y_aug : y_plain;
    const LossReport& report = use_aug ? rep_aug : rep_plain;
    if (!std::isfinite(report.hinge))
        throw std::runtime_error("non-finite hinge loss");

    const MapGradients mg = loss_subgradients(fwd.maps, gt_L, y_hat, report);
    grads_out = pred.backward(patch, fwd, mg);
    if (cfg.C != 1.0)
        for (auto& t : grads_out)
            for (double& v : t) v *= cfg.C;
    return report;
}

// One optimizer update from one instance (batch size 1).
inline LossReport ssvm_step(Predictor& pred, Optimizer& opt, const Patch& patch,
                            const Contour& gt_L, const Contour& init_L,
                            const RasterMask& gt_mask, const RunConfig& cfg) {
    GradSet grads;
    const LossReport report = compute_ssvm_grads(pred, patch, gt_L, init_L, gt_mask, cfg, grads);
    std::vector<std::vector<float>*> ptrs = pred.params().data_ptrs();
    std::vector<const std::vector<double>*> gptrs;
    gptrs.reserve(grads.size());
    for (const auto& t : grads) gptrs.push_back(&t);
    opt.step(ptrs, gptrs);
    return report;
}

// Algorithm-style loop over the training set. out_dir may be empty to skip
// logs and checkpoints. For the convnet a single shared predictor is
// trained; directgrid keeps free maps per training instance.
inline TrainResult train_ssvm(const RunConfig& cfg, const std::vector<Instance>& data,
                              const std::string& out_dir = "", bool verbose = false) {
    if (data.empty()) throw std::invalid_argument("train_ssvm: empty training set");
    const int U = data[0].patch.width, V = data[0].patch.height, d = data[0].patch.channels;
    const bool directgrid = cfg.predictor == "directgrid";
    const bool augment = cfg.augment && !directgrid;

    TrainResult result;
    std::vector<Predictor*> preds(data.size(), nullptr);
    std::vector<std::unique_ptr<Optimizer>> opts;
    if (directgrid) {
        for (size_t i = 0; i < data.size(); ++i) {
            result.per_instance.push_back(
                std::make_unique<DirectGridPredictor>(cfg.predictor_config(U, V, d)));
            preds[i] = result.per_instance.back().get();
            opts.push_back(std::make_unique<Optimizer>(cfg.optim_config()));
        }
    } else {
        result.shared = std::make_unique<ConvNetPredictor>(cfg.predictor_config(U, V, d));
        for (size_t i = 0; i < data.size(); ++i) preds[i] = result.shared.get();
        opts.push_back(std::make_unique<Optimizer>(cfg.optim_config()));
    }
    for (const Instance& inst : data) result.instance_ids.push_back(inst.id);

    // L-node ground truth and init, fixed per instance (recomputed under
    // augmentation)
    std::vector<Contour> gt_L(data.size()), init_L(data.size());
    std::vector<RasterMask> gt_mask(data.size());
    for (size_t i = 0; i < data.size(); ++i) {
        gt_L[i] = resample_closed(ensure_ccw(data[i].gt), cfg.L);
        init_L[i] = resample_closed(ensure_ccw(data[i].init), cfg.L);
        gt_mask[i] = rasterize(data[i].gt, U, V);
    }

    std::ofstream log;
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        std::filesystem::create_directories(out_dir + "/checkpoints");
        std::ofstream cf(out_dir + "/config.json", std::ios::trunc);
        cf << cfg.to_json().dump(2) << "\n";
        log.open(out_dir + "/log.jsonl", std::ios::trunc);
    }

    std::mt19937_64 shuffle_rng(cfg.seed ^ 0x5b5b5b5bull);
    std::vector<size_t> order(data.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    long iter = 0;
    const double lr = cfg.resolved_lr();
    // per-instance free parameters can't share a batch
    const size_t batch = directgrid ? 1 : static_cast<size_t>(std::max(1, cfg.batch));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double epoch_lr = lr * std::pow(cfg.lr_decay, static_cast<double>(epoch));
        for (auto& o : opts) o->set_lr(epoch_lr);
        for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng() % i]);
        double hinge_sum = 0.0, task_sum = 0.0;
        for (size_t chunk = 0; chunk < order.size(); chunk += batch) {
            const size_t chunk_end = std::min(chunk + batch, order.size());
            GradSet accum;
            for (size_t oi = chunk; oi < chunk_end; ++oi) {
                const size_t i = order[oi];
                LossReport rep;
                GradSet grads;
                try {
                    if (augment) {
                        const int k = static_cast<int>(shuffle_rng() % 8);
                        const Instance aug = detail::transform_instance(data[i], k);
                        rep = compute_ssvm_grads(*preds[i], aug.patch,
                                                 resample_closed(ensure_ccw(aug.gt), cfg.L),
                                                 resample_closed(ensure_ccw(aug.init), cfg.L),
                                                 rasterize(aug.gt, U, V), cfg, grads);
                    } else {
                        rep = compute_ssvm_grads(*preds[i], data[i].patch, gt_L[i], init_L[i],
                                                 gt_mask[i], cfg, grads);
                    }
                } catch (const std::exception& e) {
                    if (!out_dir.empty()) {
                        const std::string dump = out_dir + "/nan_dump";
                        std::filesystem::create_directories(dump);
                        save_energy_maps(preds[i]->forward(data[i].patch), dump + "/maps");
                        std::ofstream cf(dump + "/contours.json", std::ios::trunc);
                        cf << nlohmann::json{{"id", data[i].id},
                                             {"gt", detail::contour_json(gt_L[i])},
                                             {"init", detail::contour_json(init_L[i])}}
                                  .dump(2);
                    }
                    throw std::runtime_error(std::string("training aborted at instance ") +
                                             data[i].id + ": " + e.what());
                }

                if (directgrid) {
                    std::vector<std::vector<float>*> ptrs = preds[i]->params().data_ptrs();
                    std::vector<const std::vector<double>*> gptrs;
                    for (const auto& t : grads) gptrs.push_back(&t);
                    opts[i]->step(ptrs, gptrs);
                } else if (accum.empty()) {
                    accum = std::move(grads);
                } else {
                    for (size_t t = 0; t < accum.size(); ++t)
                        for (size_t j = 0; j < accum[t].size(); ++j) accum[t][j] += grads[t][j];
                }

                ++iter;
                hinge_sum += rep.hinge;
                task_sum += rep.task_loss;
                if (log)
                    log << nlohmann::json{{"iter", iter},
                                          {"epoch", epoch},
                                          {"id", data[i].id},
                                          {"hinge", rep.hinge},
                                          {"task_loss", rep.task_loss},
                                          {"energy_gap", rep.energy_hat - rep.energy_gt},
                                          {"lr", epoch_lr}}
                               .dump()
                        << "\n";
            }
            if (!directgrid) {
                const double inv = 1.0 / static_cast<double>(chunk_end - chunk);
                for (auto& t : accum)
                    for (double& v : t) v *= inv;
                std::vector<std::vector<float>*> ptrs = result.shared->params().data_ptrs();
                std::vector<const std::vector<double>*> gptrs;
                for (const auto& t : accum) gptrs.push_back(&t);
                opts[0]->step(ptrs, gptrs);
            }
        }
        result.stats.epoch_mean_hinge.push_back(hinge_sum / static_cast<double>(data.size()));
        result.stats.epoch_mean_task_loss.push_back(task_sum / static_cast<double>(data.size()));
        if (verbose)
            std::fprintf(stderr, "epoch %3d  mean hinge %.5f  mean task loss %.4f\n", epoch,
                         result.stats.epoch_mean_hinge.back(),
                         result.stats.epoch_mean_task_loss.back());
        if (!out_dir.empty() && result.shared) {
            char name[64];
            std::snprintf(name, sizeof(name), "/checkpoints/epoch_%03d.dsac", epoch);
            save_predictor(*result.shared, out_dir + name);
        }
    }
    result.stats.steps = iter;

    if (!out_dir.empty()) {
        if (result.shared) {
            save_predictor(*result.shared, out_dir + "/model.dsac");
        } else {
            const std::string mdir = out_dir + "/model_directgrid";
            std::filesystem::create_directories(mdir);
            for (size_t i = 0; i < result.per_instance.size(); ++i)
                save_predictor(*result.per_instance[i], mdir + "/" + data[i].id + ".dsac",
                               {{"instance_id", data[i].id}});
        }
    }
    return result;
}

}  // namespace dsac
