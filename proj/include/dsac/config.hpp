#pragma once

// One flat configuration object covering contour, inference, loss and
// predictor settings. Every run serializes its RunConfig next to its
// outputs so results are reproducible from the stored file alone.

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "dsac/inference.hpp"
#include "dsac/predictor.hpp"
#include "dsac/ssvm.hpp"

namespace dsac {

struct RunConfig {
    // contour / inference
    int L = 60;
    int iterations = 50;
    double step_gamma = 1.0;

    // structured loss / optimization
    std::string optimizer = "adam";
    double lr = -1.0;       // < 0: resolved per predictor kind
    double lr_decay = 1.0;  // multiplicative per-epoch factor
    double C = 1.0;
    double l2 = 1e-4;
    double c_delta = 0.3;
    int epochs = 30;
    int batch = 1;
    uint64_t seed = 1;
    bool augment = true;  // random 90-degree rotations/flips (convnet only)

    // predictor architecture
    std::string predictor = "convnet";
    std::vector<int> conv_kernels = {7, 5, 3};
    std::vector<int> conv_channels = {16, 32, 64};
    int mlp_hidden = 32;
    bool max_pool = false;
    double smooth_init = 0.0;  // raw alpha/beta pre-activation at init

    // ablations
    bool alpha_local = false;
    bool beta_local = true;
    bool kappa_local = true;
    bool no_kappa = false;

    double resolved_lr() const {
        if (lr >= 0.0) return lr;
        return predictor == "directgrid" ? 2e-2 : 1e-4;
    }

    InferenceConfig inference_config() const {
        InferenceConfig c;
        c.iterations = iterations;
        c.step_gamma = step_gamma;
        return c;
    }

    OptimConfig optim_config() const {
        OptimConfig c;
        c.kind = optimizer == "sgd" ? OptimConfig::Kind::sgd : OptimConfig::Kind::adam;
        c.lr = resolved_lr();
        c.l2 = l2;
        return c;
    }

    PredictorConfig predictor_config(int U, int V, int d) const {
        PredictorConfig c;
        c.kind = predictor;
        c.width = U;
        c.height = V;
        c.channels = d;
        c.conv_kernels = conv_kernels;
        c.conv_channels = conv_channels;
        c.mlp_hidden = mlp_hidden;
        c.max_pool = max_pool;
        c.smooth_raw_init = smooth_init;
        c.alpha_local = alpha_local;
        c.beta_local = beta_local;
        c.kappa_local = kappa_local;
        c.no_kappa = no_kappa;
        c.seed = seed;
        return c;
    }

    nlohmann::json to_json() const {
        return {{"L", L},
                {"iterations", iterations},
                {"step_gamma", step_gamma},
                {"optimizer", optimizer},
                {"lr", lr},
                {"lr_decay", lr_decay},
                {"C", C},
                {"l2", l2},
                {"c_delta", c_delta},
                {"epochs", epochs},
                {"batch", batch},
                {"seed", seed},
                {"augment", augment},
                {"predictor", predictor},
                {"conv_kernels", conv_kernels},
                {"conv_channels", conv_channels},
                {"mlp_hidden", mlp_hidden},
                {"max_pool", max_pool},
                {"smooth_init", smooth_init},
                {"alpha_local", alpha_local},
                {"beta_local", beta_local},
                {"kappa_local", kappa_local},
                {"no_kappa", no_kappa}};
    }

    static RunConfig from_json(const nlohmann::json& j) {
        RunConfig c;
        c.L = j.value("L", c.L);
        c.iterations = j.value("iterations", c.iterations);
        c.step_gamma = j.value("step_gamma", c.step_gamma);
        c.optimizer = j.value("optimizer", c.optimizer);
        c.lr = j.value("lr", c.lr);
        c.lr_decay = j.value("lr_decay", c.lr_decay);
        c.C = j.value("C", c.C);
        c.l2 = j.value("l2", c.l2);
        c.c_delta = j.value("c_delta", c.c_delta);
        c.epochs = j.value("epochs", c.epochs);
        c.batch = j.value("batch", c.batch);
        c.seed = j.value("seed", c.seed);
        c.augment = j.value("augment", c.augment);
        c.predictor = j.value("predictor", c.predictor);
        c.conv_kernels = j.value("conv_kernels", c.conv_kernels);
        c.conv_channels = j.value("conv_channels", c.conv_channels);
        c.mlp_hidden = j.value("mlp_hidden", c.mlp_hidden);
        c.max_pool = j.value("max_pool", c.max_pool);
        c.smooth_init = j.value("smooth_init", c.smooth_init);
        c.alpha_local = j.value("alpha_local", c.alpha_local);
        c.beta_local = j.value("beta_local", c.beta_local);
        c.kappa_local = j.value("kappa_local", c.kappa_local);
        c.no_kappa = j.value("no_kappa", c.no_kappa);
        return c;
    }
};

}  // namespace dsac
