#pragma once

// Energy-map predictors. Two implementations share one interface:
//
//   DirectGrid  - the four raw maps are free parameters for one instance;
//                 no image features. Used to exercise the structured loss
//                 independently of any feature model.
//   ConvNet     - small convolutional feature extractor with hypercolumn
//                 concatenation and a per-pixel MLP head, trained by exact
//                 manual backpropagation.
//
// Heads: D and kappa are identity, alpha and beta pass through softplus so
// the internal energy stays convex. Non-local modes reduce a map to its
// spatial mean before broadcasting.

#include <cstdint>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "dsac/energy.hpp"
#include "dsac/grid.hpp"
#include "dsac/nn.hpp"
#include "dsac/ssvm.hpp"

namespace dsac {

struct Patch {
    int width = 0, height = 0, channels = 0;
    std::vector<float> pixels;  // channel-major planes, [c][v][u]

    Patch() = default;
    Patch(int U, int V, int d)
        : width(U), height(V), channels(d), pixels(static_cast<size_t>(U) * V * d, 0.0f) {}

    float at(int c, int v, int u) const {
        return pixels[(static_cast<size_t>(c) * height + v) * width + u];
    }
    float& at(int c, int v, int u) {
        return pixels[(static_cast<size_t>(c) * height + v) * width + u];
    }
};

struct PredictorConfig {
    std::string kind = "convnet";  // or "directgrid"
    int width = 128;
    int height = 128;
    int channels = 3;
    std::vector<int> conv_kernels = {7, 5, 3};
    std::vector<int> conv_channels = {16, 32, 64};
    int mlp_hidden = 32;
    bool max_pool = false;  // average pooling by default
    bool alpha_local = false;
    bool beta_local = true;
    bool kappa_local = true;
    bool no_kappa = false;
    // raw pre-activation init for the alpha/beta channels; softplus of this
    // is the starting membrane/thin-plate weight
    double smooth_raw_init = 0.0;
    uint64_t seed = 1;

    nlohmann::json to_json() const {
        return {{"kind", kind},         {"width", width},
                {"height", height},     {"channels", channels},
                {"conv_kernels", conv_kernels}, {"conv_channels", conv_channels},
                {"mlp_hidden", mlp_hidden},     {"max_pool", max_pool},
                {"alpha_local", alpha_local},   {"beta_local", beta_local},
                {"kappa_local", kappa_local},   {"no_kappa", no_kappa},
                {"smooth_raw_init", smooth_raw_init},
                {"seed", seed}};
    }

    static PredictorConfig from_json(const nlohmann::json& j) {
        PredictorConfig c;
        c.kind = j.at("kind").get<std::string>();
        c.width = j.at("width").get<int>();
        c.height = j.at("height").get<int>();
        c.channels = j.at("channels").get<int>();
        c.conv_kernels = j.at("conv_kernels").get<std::vector<int>>();
        c.conv_channels = j.at("conv_channels").get<std::vector<int>>();
        c.mlp_hidden = j.at("mlp_hidden").get<int>();
        c.max_pool = j.at("max_pool").get<bool>();
        c.alpha_local = j.at("alpha_local").get<bool>();
        c.beta_local = j.at("beta_local").get<bool>();
        c.kappa_local = j.at("kappa_local").get<bool>();
        c.no_kappa = j.at("no_kappa").get<bool>();
        c.smooth_raw_init = j.value("smooth_raw_init", 0.0);
        c.seed = j.at("seed").get<uint64_t>();
        return c;
    }

    // Hash of the architecture-defining fields (seed excluded).
    uint64_t arch_hash() const {
        nlohmann::json j = to_json();
        j.erase("seed");
        const std::string s = j.dump();
        uint64_t h = 1469598103934665603ull;
        for (char ch : s) {
            h ^= static_cast<unsigned char>(ch);
            h *= 1099511628211ull;
        }
        return h;
    }
};

struct NamedTensor {
    std::string name;
    std::vector<int> shape;
    std::vector<float> data;

    size_t count() const { return data.size(); }
};

struct ParamSet {
    std::vector<NamedTensor> tensors;

    size_t total_count() const {
        size_t n = 0;
        for (const auto& t : tensors) n += t.count();
        return n;
    }
    NamedTensor& add(std::string name, std::vector<int> shape) {
        size_t n = 1;
        for (int d : shape) n *= static_cast<size_t>(d);
        tensors.push_back({std::move(name), std::move(shape), std::vector<float>(n, 0.0f)});
        return tensors.back();
    }
    std::vector<std::vector<float>*> data_ptrs() {
        std::vector<std::vector<float>*> p;
        p.reserve(tensors.size());
        for (auto& t : tensors) p.push_back(&t.data);
        return p;
    }
};

// One double gradient vector per tensor, aligned with ParamSet order.
using GradSet = std::vector<std::vector<double>>;

inline GradSet zero_grads(const ParamSet& p) {
    GradSet g(p.tensors.size());
    for (size_t i = 0; i < p.tensors.size(); ++i) g[i].assign(p.tensors[i].count(), 0.0);
    return g;
}

struct ForwardResult {
    EnergyMaps maps;
    std::shared_ptr<void> cache;  // predictor-specific activations
};

class Predictor {
public:
    virtual ~Predictor() = default;
    virtual const PredictorConfig& config() const = 0;
    virtual ParamSet& params() = 0;
    virtual const ParamSet& params() const = 0;

    virtual ForwardResult forward_train(const Patch& x) const = 0;
    virtual GradSet backward(const Patch& x, const ForwardResult& fwd,
                             const MapGradients& g) const = 0;

    EnergyMaps forward(const Patch& x) const { return forward_train(x).maps; }
};

namespace detail {

inline void check_patch(const PredictorConfig& cfg, const Patch& x) {
    if (x.width != cfg.width || x.height != cfg.height || x.channels != cfg.channels)
        throw std::invalid_argument("predictor: patch shape does not match configured architecture");
}

// Shared head logic: raw activations for the four channels -> EnergyMaps.
struct HeadMaps {
    Grid alpha_act;  // softplus applied, before any reduction
    Grid beta_act;
    Grid kappa_raw;
};

inline EnergyMaps apply_heads(const PredictorConfig& cfg, Grid d_raw, const Grid& alpha_raw,
                              const Grid& beta_raw, const Grid& kappa_raw, HeadMaps* keep) {
    const int U = cfg.width, V = cfg.height;
    EnergyMaps m;
    m.D = std::move(d_raw);
    m.alpha_local = cfg.alpha_local;
    m.beta_local = cfg.beta_local;
    m.kappa_local = cfg.kappa_local && !cfg.no_kappa;

    Grid alpha_act(U, V), beta_act(U, V);
    for (size_t i = 0; i < alpha_act.data.size(); ++i) {
        alpha_act.data[i] = nn::softplus(alpha_raw.data[i]);
        beta_act.data[i] = nn::softplus(beta_raw.data[i]);
    }
    if (cfg.alpha_local) {
        m.alpha_grid = alpha_act;
    } else {
        m.alpha_scalar = grid_mean(alpha_act);
    }
    if (cfg.beta_local) {
        m.beta = beta_act;
    } else {
        m.beta = Grid(U, V, grid_mean(beta_act));
    }
    if (cfg.no_kappa) {
        m.kappa = Grid(U, V, 0.0);
    } else if (cfg.kappa_local) {
        m.kappa = kappa_raw;
    } else {
        m.kappa = Grid(U, V, grid_mean(kappa_raw));
    }
    if (keep) {
        keep->alpha_act = std::move(alpha_act);
        keep->beta_act = std::move(beta_act);
        keep->kappa_raw = kappa_raw;
    }
    return m;
}

// Chain MapGradients through the heads back to the four raw channels.
// alpha/beta: d softplus = sigmoid(raw); scalar modes spread the reduced
// gradient uniformly over the grid first.
inline void head_backward(const PredictorConfig& cfg, const MapGradients& g, const Grid& alpha_raw,
                          const Grid& beta_raw, Grid& d_draw, Grid& d_alpha_raw, Grid& d_beta_raw,
                          Grid& d_kappa_raw) {
    const int U = cfg.width, V = cfg.height;
    const double N = static_cast<double>(U) * V;
    d_draw = g.dD;
    d_alpha_raw = Grid(U, V);
    d_beta_raw = Grid(U, V);
    d_kappa_raw = Grid(U, V);

    if (cfg.alpha_local) {
        for (size_t i = 0; i < d_alpha_raw.data.size(); ++i)
            d_alpha_raw.data[i] = g.dAlpha_grid.data[i] * nn::sigmoid(alpha_raw.data[i]);
    } else {
        const double spread = g.dAlpha_scalar / N;
        for (size_t i = 0; i < d_alpha_raw.data.size(); ++i)
            d_alpha_raw.data[i] = spread * nn::sigmoid(alpha_raw.data[i]);
    }
    if (cfg.beta_local) {
        for (size_t i = 0; i < d_beta_raw.data.size(); ++i)
            d_beta_raw.data[i] = g.dBeta.data[i] * nn::sigmoid(beta_raw.data[i]);
    } else {
        const double spread = grid_sum(g.dBeta) / N;
        for (size_t i = 0; i < d_beta_raw.data.size(); ++i)
            d_beta_raw.data[i] = spread * nn::sigmoid(beta_raw.data[i]);
    }
    if (!cfg.no_kappa) {
        if (cfg.kappa_local) {
            d_kappa_raw = g.dKappa;
        } else {
            const double spread = grid_sum(g.dKappa) / N;
            for (size_t i = 0; i < d_kappa_raw.data.size(); ++i) d_kappa_raw.data[i] = spread;
        }
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// DirectGrid

class DirectGridPredictor final : public Predictor {
public:
    explicit DirectGridPredictor(PredictorConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.kind = "directgrid";
        const std::vector<int> shape{cfg_.height, cfg_.width};
        params_.add("raw_D", shape);
        NamedTensor& a = params_.add("raw_alpha", shape);
        NamedTensor& b = params_.add("raw_beta", shape);
        params_.add("raw_kappa", shape);
        const float init = static_cast<float>(cfg_.smooth_raw_init);
        std::fill(a.data.begin(), a.data.end(), init);
        std::fill(b.data.begin(), b.data.end(), init);
    }

    const PredictorConfig& config() const override { return cfg_; }
    ParamSet& params() override { return params_; }
    const ParamSet& params() const override { return params_; }

    ForwardResult forward_train(const Patch& x) const override {
        detail::check_patch(cfg_, x);
        const int U = cfg_.width, V = cfg_.height;
        Grid d_raw(U, V), a_raw(U, V), b_raw(U, V), k_raw(U, V);
        to_grid(0, d_raw);
        to_grid(1, a_raw);
        to_grid(2, b_raw);
        to_grid(3, k_raw);
        ForwardResult r;
        r.maps = detail::apply_heads(cfg_, std::move(d_raw), a_raw, b_raw, k_raw, nullptr);
        return r;
    }

    GradSet backward(const Patch& x, const ForwardResult&, const MapGradients& g) const override {
        detail::check_patch(cfg_, x);
        const int U = cfg_.width, V = cfg_.height;
        Grid a_raw(U, V), b_raw(U, V);
        to_grid(1, a_raw);
        to_grid(2, b_raw);
        Grid dD, dA, dB, dK;
        detail::head_backward(cfg_, g, a_raw, b_raw, dD, dA, dB, dK);
        GradSet out = zero_grads(params_);
        out[0] = std::move(dD.data);
        out[1] = std::move(dA.data);
        out[2] = std::move(dB.data);
        out[3] = std::move(dK.data);
        return out;
    }

private:
    void to_grid(size_t tensor, Grid& g) const {
        const auto& t = params_.tensors[tensor].data;
        for (size_t i = 0; i < t.size(); ++i) g.data[i] = static_cast<double>(t[i]);
    }

    PredictorConfig cfg_;
    ParamSet params_;
};

// ---------------------------------------------------------------------------
// ConvNet

class ConvNetPredictor final : public Predictor {
public:
    explicit ConvNetPredictor(PredictorConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.kind = "convnet";
        if (cfg_.conv_kernels.size() != cfg_.conv_channels.size())
            throw std::invalid_argument("ConvNetPredictor: kernel/channel list size mismatch");
        int side = std::min(cfg_.width, cfg_.height);
        for (size_t k = 0; k < cfg_.conv_kernels.size(); ++k) {
            if (side % 2 != 0)
                throw std::invalid_argument("ConvNetPredictor: patch size not divisible by pools");
            side /= 2;
        }
        int cin = cfg_.channels;
        hyper_channels_ = 0;
        for (size_t k = 0; k < cfg_.conv_channels.size(); ++k) {
            const int co = cfg_.conv_channels[k], ks = cfg_.conv_kernels[k];
            params_.add("conv" + std::to_string(k) + ".weight", {co, cin, ks, ks});
            params_.add("conv" + std::to_string(k) + ".bias", {co});
            hyper_channels_ += co;
            cin = co;
        }
        params_.add("mlp1.weight", {cfg_.mlp_hidden, hyper_channels_});
        params_.add("mlp1.bias", {cfg_.mlp_hidden});
        params_.add("mlp2.weight", {4, cfg_.mlp_hidden});
        params_.add("mlp2.bias", {4});
        init_weights();
    }

    const PredictorConfig& config() const override { return cfg_; }
    ParamSet& params() override { return params_; }
    const ParamSet& params() const override { return params_; }
    int hyper_channels() const { return hyper_channels_; }

    struct Cache {
        nn::Tensor3 input;
        std::vector<nn::Tensor3> block_in;   // conv input per block
        std::vector<nn::Tensor3> pre;        // conv output before relu
        std::vector<nn::Tensor3> pooled;     // block output
        std::vector<std::vector<uint8_t>> argmax;
        std::vector<double> hyper;  // pixel-major (H*W) x hyper_channels
        std::vector<double> hz;     // pixel-major hidden pre-activations
        Grid d_raw, a_raw, b_raw, k_raw;
    };

    ForwardResult forward_train(const Patch& x) const override {
        detail::check_patch(cfg_, x);
        auto cache = std::make_shared<Cache>();
        run_forward(x, *cache);
        ForwardResult r;
        r.maps = detail::apply_heads(cfg_, cache->d_raw, cache->a_raw, cache->b_raw, cache->k_raw,
                                     nullptr);
        r.cache = cache;
        return r;
    }

    GradSet backward(const Patch& x, const ForwardResult& fwd,
                     const MapGradients& g) const override {
        detail::check_patch(cfg_, x);
        const auto* cache = static_cast<const Cache*>(fwd.cache.get());
        if (!cache) throw std::invalid_argument("ConvNetPredictor::backward: missing forward cache");
        return run_backward(*cache, g);
    }

private:
    static double frand(std::mt19937_64& rng) {
        // uniform in [-1, 1)
        return 2.0 * (static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0)) - 1.0;
    }

    void init_weights() {
        std::mt19937_64 rng(cfg_.seed);
        for (auto& t : params_.tensors) {
            if (t.name.find(".bias") != std::string::npos) continue;
            size_t fan_in = 1;
            for (size_t d = 1; d < t.shape.size(); ++d) fan_in *= static_cast<size_t>(t.shape[d]);
            const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
            for (auto& v : t.data) v = static_cast<float>(scale * frand(rng));
        }
        NamedTensor& head_bias = params_.tensors.back();
        head_bias.data[1] = static_cast<float>(cfg_.smooth_raw_init);
        head_bias.data[2] = static_cast<float>(cfg_.smooth_raw_init);
    }

    std::vector<double> tensor_as_double(size_t idx) const {
        const auto& t = params_.tensors[idx].data;
        std::vector<double> out(t.size());
        for (size_t i = 0; i < t.size(); ++i) out[i] = static_cast<double>(t[i]);
        return out;
    }

    void run_forward(const Patch& x, Cache& c) const {
        const int U = cfg_.width, V = cfg_.height;
        const int nblocks = static_cast<int>(cfg_.conv_channels.size());
        c.input = nn::Tensor3(cfg_.channels, V, U);
        for (size_t i = 0; i < c.input.data.size(); ++i)
            c.input.data[i] = static_cast<double>(x.pixels[i]);

        c.block_in.resize(static_cast<size_t>(nblocks));
        c.pre.resize(static_cast<size_t>(nblocks));
        c.pooled.resize(static_cast<size_t>(nblocks));
        c.argmax.resize(static_cast<size_t>(nblocks));

        const nn::Tensor3* cur = &c.input;
        for (int k = 0; k < nblocks; ++k) {
            c.block_in[static_cast<size_t>(k)] = *cur;
            const auto w = tensor_as_double(static_cast<size_t>(2 * k));
            const auto b = tensor_as_double(static_cast<size_t>(2 * k + 1));
            nn::Tensor3 z;
            nn::conv2d_forward(*cur, w, b, cfg_.conv_channels[static_cast<size_t>(k)],
                               cfg_.conv_kernels[static_cast<size_t>(k)], z);
            c.pre[static_cast<size_t>(k)] = z;
            nn::relu_forward(z);
            if (cfg_.max_pool)
                nn::maxpool2_forward(z, c.pooled[static_cast<size_t>(k)],
                                     c.argmax[static_cast<size_t>(k)]);
            else
                nn::avgpool2_forward(z, c.pooled[static_cast<size_t>(k)]);
            cur = &c.pooled[static_cast<size_t>(k)];
        }

        // hypercolumn: every block output upsampled to full resolution
        const size_t npix = static_cast<size_t>(U) * V;
        c.hyper.assign(npix * static_cast<size_t>(hyper_channels_), 0.0);
        int ch_off = 0;
        for (int k = 0; k < nblocks; ++k) {
            nn::upsample_bilinear_into(c.pooled[static_cast<size_t>(k)], V, U, c.hyper.data(),
                                       hyper_channels_, ch_off);
            ch_off += cfg_.conv_channels[static_cast<size_t>(k)];
        }

        // per-pixel MLP
        const size_t base = static_cast<size_t>(2 * nblocks);
        const auto w1 = tensor_as_double(base);
        const auto b1 = tensor_as_double(base + 1);
        const auto w2 = tensor_as_double(base + 2);
        const auto b2 = tensor_as_double(base + 3);
        const int hid = cfg_.mlp_hidden, hc = hyper_channels_;

        c.hz.assign(npix * static_cast<size_t>(hid), 0.0);
        c.d_raw = Grid(U, V);
        c.a_raw = Grid(U, V);
        c.b_raw = Grid(U, V);
        c.k_raw = Grid(U, V);
        std::vector<double> h(static_cast<size_t>(hid));
        for (size_t p = 0; p < npix; ++p) {
            const double* row = c.hyper.data() + p * static_cast<size_t>(hc);
            double* hz = c.hz.data() + p * static_cast<size_t>(hid);
            for (int j = 0; j < hid; ++j) {
                const double* wr = w1.data() + static_cast<size_t>(j) * hc;
                double acc = b1[static_cast<size_t>(j)];
                for (int i = 0; i < hc; ++i) acc += wr[i] * row[i];
                hz[j] = acc;
                h[static_cast<size_t>(j)] = acc > 0.0 ? acc : 0.0;
            }
            double out[4];
            for (int o = 0; o < 4; ++o) {
                const double* wr = w2.data() + static_cast<size_t>(o) * hid;
                double acc = b2[static_cast<size_t>(o)];
                for (int j = 0; j < hid; ++j) acc += wr[j] * h[static_cast<size_t>(j)];
                out[o] = acc;
            }
            c.d_raw.data[p] = out[0];
            c.a_raw.data[p] = out[1];
            c.b_raw.data[p] = out[2];
            c.k_raw.data[p] = out[3];
        }
    }

    GradSet run_backward(const Cache& c, const MapGradients& g) const {
        const int U = cfg_.width, V = cfg_.height;
        const int nblocks = static_cast<int>(cfg_.conv_channels.size());
        const size_t npix = static_cast<size_t>(U) * V;
        const int hid = cfg_.mlp_hidden, hc = hyper_channels_;

        Grid dD, dA, dB, dK;
        detail::head_backward(cfg_, g, c.a_raw, c.b_raw, dD, dA, dB, dK);

        GradSet grads = zero_grads(params_);
        const size_t base = static_cast<size_t>(2 * nblocks);
        const auto w1 = tensor_as_double(base);
        const auto w2 = tensor_as_double(base + 2);
        std::vector<double>& dw1 = grads[base];
        std::vector<double>& db1 = grads[base + 1];
        std::vector<double>& dw2 = grads[base + 2];
        std::vector<double>& db2 = grads[base + 3];

        std::vector<double> d_hyper(npix * static_cast<size_t>(hc), 0.0);
        std::vector<double> dh(static_cast<size_t>(hid));
        for (size_t p = 0; p < npix; ++p) {
            const double dout[4] = {dD.data[p], dA.data[p], dB.data[p], dK.data[p]};
            const double* hz = c.hz.data() + p * static_cast<size_t>(hid);
            const double* row = c.hyper.data() + p * static_cast<size_t>(hc);
            for (int j = 0; j < hid; ++j) dh[static_cast<size_t>(j)] = 0.0;
            for (int o = 0; o < 4; ++o) {
                const double go = dout[o];
                if (go == 0.0) continue;
                db2[static_cast<size_t>(o)] += go;
                const double* wr = w2.data() + static_cast<size_t>(o) * hid;
                double* dwr = dw2.data() + static_cast<size_t>(o) * hid;
                for (int j = 0; j < hid; ++j) {
                    const double hj = hz[j] > 0.0 ? hz[j] : 0.0;
                    dwr[j] += go * hj;
                    dh[static_cast<size_t>(j)] += go * wr[j];
                }
            }
            double* drow = d_hyper.data() + p * static_cast<size_t>(hc);
            for (int j = 0; j < hid; ++j) {
                if (hz[j] <= 0.0) continue;
                const double gj = dh[static_cast<size_t>(j)];
                if (gj == 0.0) continue;
                db1[static_cast<size_t>(j)] += gj;
                const double* wr = w1.data() + static_cast<size_t>(j) * hc;
                double* dwr = dw1.data() + static_cast<size_t>(j) * hc;
                for (int i = 0; i < hc; ++i) {
                    dwr[i] += gj * row[i];
                    drow[i] += gj * wr[i];
                }
            }
        }

        // blocks in reverse: hypercolumn adjoint + gradient from the next conv
        nn::Tensor3 d_next;  // gradient w.r.t. block k's pooled output coming from block k+1
        int ch_off_end = hc;
        for (int k = nblocks - 1; k >= 0; --k) {
            const auto& pooled = c.pooled[static_cast<size_t>(k)];
            ch_off_end -= cfg_.conv_channels[static_cast<size_t>(k)];
            nn::Tensor3 d_pooled(pooled.c, pooled.h, pooled.w);
            nn::upsample_bilinear_adjoint(d_hyper.data(), hc, ch_off_end, V, U, d_pooled);
            if (d_next.c > 0)
                for (size_t i = 0; i < d_pooled.data.size(); ++i)
                    d_pooled.data[i] += d_next.data[i];

            const auto& pre = c.pre[static_cast<size_t>(k)];
            nn::Tensor3 d_act;
            if (cfg_.max_pool)
                nn::maxpool2_backward(d_pooled, c.argmax[static_cast<size_t>(k)], pre.h, pre.w,
                                      d_act);
            else
                nn::avgpool2_backward(d_pooled, pre.h, pre.w, d_act);
            nn::relu_backward(pre, d_act);

            const auto w = tensor_as_double(static_cast<size_t>(2 * k));
            nn::Tensor3 d_in;
            nn::conv2d_backward(c.block_in[static_cast<size_t>(k)], w,
                                cfg_.conv_channels[static_cast<size_t>(k)],
                                cfg_.conv_kernels[static_cast<size_t>(k)], d_act, d_in,
                                grads[static_cast<size_t>(2 * k)],
                                grads[static_cast<size_t>(2 * k + 1)]);
            d_next = std::move(d_in);
        }
        return grads;
    }

    PredictorConfig cfg_;
    ParamSet params_;
    int hyper_channels_ = 0;
};

inline std::unique_ptr<Predictor> make_predictor(const PredictorConfig& cfg) {
    if (cfg.kind == "directgrid") return std::make_unique<DirectGridPredictor>(cfg);
    if (cfg.kind == "convnet") return std::make_unique<ConvNetPredictor>(cfg);
    throw std::invalid_argument("make_predictor: unknown kind '" + cfg.kind + "'");
}

}  // namespace dsac
