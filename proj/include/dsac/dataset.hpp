#pragma once

// Synthetic building-footprint patches, real-image ingestion around
// initialization polygons, deterministic splitting, and the on-disk dataset
// layout (patches/ PNGs + polygons.jsonl + manifest.json).

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "dsac/geometry.hpp"
#include "dsac/image_io.hpp"
#include "dsac/predictor.hpp"

namespace dsac {

struct InstanceMeta {
    std::string source = "synthetic";
    double scale_factor = 1.0;  // patch pixels per world pixel
    double crop_u0 = 0.0;       // world coordinate of patch pixel (0,0)
    double crop_v0 = 0.0;
    bool edge_padded = false;
};

struct Instance {
    std::string id;
    Patch patch;
    Contour gt;    // ground-truth polygon in patch coordinates, CCW
    Contour init;  // initialization polygon in patch coordinates
    InstanceMeta meta;
};

enum class ShapeFamily { axis_rect, rot_rect, lshape, mixed };
enum class TextureKind { flat, gradient, speckle };

inline std::string to_string(ShapeFamily f) {
    switch (f) {
        case ShapeFamily::axis_rect: return "axis-rect";
        case ShapeFamily::rot_rect: return "rot-rect";
        case ShapeFamily::lshape: return "l-shape";
        case ShapeFamily::mixed: return "mixed";
    }
    return "mixed";
}

inline ShapeFamily shape_family_from_string(const std::string& s) {
    if (s == "axis-rect") return ShapeFamily::axis_rect;
    if (s == "rot-rect") return ShapeFamily::rot_rect;
    if (s == "l-shape") return ShapeFamily::lshape;
    if (s == "mixed") return ShapeFamily::mixed;
    throw std::invalid_argument("unknown shape family: " + s);
}

inline std::string to_string(TextureKind t) {
    switch (t) {
        case TextureKind::flat: return "flat";
        case TextureKind::gradient: return "gradient";
        case TextureKind::speckle: return "speckle";
    }
    return "flat";
}

inline TextureKind texture_from_string(const std::string& s) {
    if (s == "flat") return TextureKind::flat;
    if (s == "gradient") return TextureKind::gradient;
    if (s == "speckle") return TextureKind::speckle;
    throw std::invalid_argument("unknown texture: " + s);
}

struct SynthConfig {
    int n = 200;
    int size = 64;  // U = V
    ShapeFamily family = ShapeFamily::mixed;
    double noise_sigma = 0.1;
    TextureKind texture = TextureKind::flat;
    uint64_t seed = 7;
    double jitter_frac = 0.1;        // init-seed offset, fraction of patch size
    double init_radius_frac = 0.15;  // init circle radius, fraction of min(U,V)
    int init_nodes = 60;
    int distractors = 0;
    std::string id_prefix = "synth";

    nlohmann::json to_json() const {
        return {{"n", n},
                {"size", size},
                {"family", to_string(family)},
                {"noise_sigma", noise_sigma},
                {"texture", to_string(texture)},
                {"seed", seed},
                {"jitter_frac", jitter_frac},
                {"init_radius_frac", init_radius_frac},
                {"init_nodes", init_nodes},
                {"distractors", distractors},
                {"id_prefix", id_prefix}};
    }
    static SynthConfig from_json(const nlohmann::json& j) {
        SynthConfig c;
        c.n = j.value("n", c.n);
        c.size = j.value("size", c.size);
        c.family = shape_family_from_string(j.value("family", to_string(c.family)));
        c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
        c.texture = texture_from_string(j.value("texture", to_string(c.texture)));
        c.seed = j.value("seed", c.seed);
        c.jitter_frac = j.value("jitter_frac", c.jitter_frac);
        c.init_radius_frac = j.value("init_radius_frac", c.init_radius_frac);
        c.init_nodes = j.value("init_nodes", c.init_nodes);
        c.distractors = j.value("distractors", c.distractors);
        c.id_prefix = j.value("id_prefix", c.id_prefix);
        return c;
    }
};

namespace detail {

inline double urand(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0));
}

// Box-Muller, so the stream does not depend on libstdc++'s
// normal_distribution implementation.
inline double nrand(std::mt19937_64& rng) {
    const double a = std::max(urand(rng, 0.0, 1.0), 1e-300);
    const double b = urand(rng, 0.0, 1.0);
    return std::sqrt(-2.0 * std::log(a)) * std::cos(2.0 * M_PI * b);
}

inline Contour synth_shape(std::mt19937_64& rng, ShapeFamily family, int size) {
    ShapeFamily f = family;
    if (family == ShapeFamily::mixed) {
        const double pick = urand(rng, 0.0, 1.0);
        f = pick < 0.4 ? ShapeFamily::axis_rect
                       : (pick < 0.7 ? ShapeFamily::rot_rect : ShapeFamily::lshape);
    }
    const double S = static_cast<double>(size);
    const double cx = S * (0.5 + urand(rng, -0.06, 0.06));
    const double cy = S * (0.5 + urand(rng, -0.06, 0.06));
    Contour c;
    if (f == ShapeFamily::axis_rect || f == ShapeFamily::rot_rect) {
        const double w = S * urand(rng, 0.32, 0.58);
        const double h = S * urand(rng, 0.32, 0.58);
        const double th = f == ShapeFamily::rot_rect ? urand(rng, 0.0, M_PI / 2.0) : 0.0;
        const double ct = std::cos(th), st = std::sin(th);
        const double hw = 0.5 * w, hh = 0.5 * h;
        const Vec2 corners[4] = {{-hw, -hh}, {hw, -hh}, {hw, hh}, {-hw, hh}};
        for (const Vec2& p : corners)
            c.nodes.push_back({cx + ct * p.u - st * p.v, cy + st * p.u + ct * p.v});
        if (f == ShapeFamily::rot_rect) {
            // keep the rotated box inside the frame
            for (Vec2& p : c.nodes) p = clamp_to_bounds(p, size - 1, size - 1);
        }
    } else {
        const double w = S * urand(rng, 0.4, 0.62);
        const double h = S * urand(rng, 0.4, 0.62);
        const double x0 = cx - 0.5 * w, x1 = cx + 0.5 * w;
        const double y0 = cy - 0.5 * h, y1 = cy + 0.5 * h;
        const double xm = x0 + w * urand(rng, 0.35, 0.65);
        const double ym = y0 + h * urand(rng, 0.35, 0.65);
        c.nodes = {{x0, y0}, {x1, y0}, {x1, ym}, {xm, ym}, {xm, y1}, {x0, y1}};
    }
    return ensure_ccw(std::move(c));
}

inline float quantize01(double x) {
    const double q = std::round(std::clamp(x, 0.0, 1.0) * 255.0) / 255.0;
    return static_cast<float>(q);
}

}  // namespace detail

// Renders filled polygons with distinct foreground/background intensity,
// texture and additive Gaussian noise. Pixels are quantized to 8-bit levels
// so that PNG serialization round-trips exactly.
inline std::vector<Instance> generate_synthetic(const SynthConfig& cfg) {
    if (cfg.n < 0) throw std::invalid_argument("generate_synthetic: n must be >= 0");
    std::mt19937_64 rng(cfg.seed);
    std::vector<Instance> out;
    out.reserve(static_cast<size_t>(cfg.n));
    const int S = cfg.size;
    for (int i = 0; i < cfg.n; ++i) {
        Instance inst;
        char idbuf[64];
        std::snprintf(idbuf, sizeof(idbuf), "%s_%05d", cfg.id_prefix.c_str(), i);
        inst.id = idbuf;
        inst.meta.source = "synthetic";
        inst.meta.scale_factor = 1.0;

        inst.gt = detail::synth_shape(rng, cfg.family, S);
        const RasterMask mask = rasterize(inst.gt, S, S);

        const double bg = detail::urand(rng, 0.12, 0.38);
        const double fg = bg + detail::urand(rng, 0.3, 0.5);
        double tint[3];
        for (double& t : tint) t = detail::urand(rng, -0.04, 0.04);
        const double grad_th = detail::urand(rng, 0.0, 2.0 * M_PI);
        const double gdu = std::cos(grad_th) / S, gdv = std::sin(grad_th) / S;

        std::vector<RasterMask> distractor_masks;
        for (int d = 0; d < cfg.distractors; ++d) {
            Contour dc = detail::synth_shape(rng, ShapeFamily::axis_rect, S);
            const Vec2 ctr = centroid(dc);
            const Vec2 off{detail::urand(rng, -0.35, 0.35) * S, detail::urand(rng, -0.35, 0.35) * S};
            for (Vec2& p : dc.nodes)
                p = clamp_to_bounds({(p.u - ctr.u) * 0.3 + ctr.u + off.u,
                                     (p.v - ctr.v) * 0.3 + ctr.v + off.v},
                                    S, S);
            distractor_masks.push_back(rasterize(dc, S, S));
        }
        const double distractor_level = bg + detail::urand(rng, 0.12, 0.2);

        inst.patch = Patch(S, S, 3);
        for (int v = 0; v < S; ++v) {
            for (int u = 0; u < S; ++u) {
                double base = mask.at(u, v) ? fg : bg;
                if (!mask.at(u, v)) {
                    for (const auto& dm : distractor_masks)
                        if (dm.at(u, v)) base = distractor_level;
                }
                if (cfg.texture == TextureKind::gradient)
                    base += 0.1 * (gdu * (u - 0.5 * S) + gdv * (v - 0.5 * S));
                else if (cfg.texture == TextureKind::speckle)
                    base *= 1.0 + detail::urand(rng, -0.06, 0.06);
                for (int ch = 0; ch < 3; ++ch) {
                    double val = base + tint[ch];
                    if (cfg.noise_sigma > 0.0) val += cfg.noise_sigma * detail::nrand(rng);
                    inst.patch.at(ch, v, u) = detail::quantize01(val);
                }
            }
        }

        const Vec2 ctr = centroid(inst.gt);
        const Vec2 seed{ctr.u + detail::urand(rng, -cfg.jitter_frac, cfg.jitter_frac) * S,
                        ctr.v + detail::urand(rng, -cfg.jitter_frac, cfg.jitter_frac) * S};
        inst.init = init_circle(seed, cfg.init_radius_frac * S, cfg.init_nodes, S, S);
        out.push_back(std::move(inst));
    }
    return out;
}

// Deterministic shuffle split into disjoint (train, test) subsets.
// fractions must sum to 1; the train size is round(n * fractions.first).
inline std::pair<std::vector<Instance>, std::vector<Instance>> split(
    std::vector<Instance> instances, std::pair<double, double> fractions, uint64_t seed) {
    if (std::abs(fractions.first + fractions.second - 1.0) > 1e-9)
        throw std::invalid_argument("split: fractions must sum to 1");
    std::vector<size_t> idx(instances.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::mt19937_64 rng(seed);
    for (size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
    const size_t k = static_cast<size_t>(
        std::llround(fractions.first * static_cast<double>(instances.size())));
    std::pair<std::vector<Instance>, std::vector<Instance>> out;
    for (size_t i = 0; i < idx.size(); ++i) {
        if (i < k)
            out.first.push_back(std::move(instances[idx[i]]));
        else
            out.second.push_back(std::move(instances[idx[i]]));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Real-data ingestion

namespace detail {

inline double sample_image_bilinear(const ImageU8& img, int ch, double u, double v) {
    u = std::clamp(u, 0.0, static_cast<double>(img.width - 1));
    v = std::clamp(v, 0.0, static_cast<double>(img.height - 1));
    const int i = std::min(static_cast<int>(std::floor(u)), img.width - 2 >= 0 ? img.width - 2 : 0);
    const int j =
        std::min(static_cast<int>(std::floor(v)), img.height - 2 >= 0 ? img.height - 2 : 0);
    const double a = u - i, b = v - j;
    const int i1 = std::min(i + 1, img.width - 1), j1 = std::min(j + 1, img.height - 1);
    return ((1 - a) * (1 - b) * img.at(i, j, ch) + a * (1 - b) * img.at(i1, j, ch) +
            (1 - a) * b * img.at(i, j1, ch) + a * b * img.at(i1, j1, ch)) /
           255.0;
}

inline Contour contour_from_json(const nlohmann::json& nodes) {
    Contour c;
    for (const auto& p : nodes) c.nodes.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    return c;
}

inline nlohmann::json contour_to_json(const Contour& c) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const Vec2& p : c.nodes) nodes.push_back({p.u, p.v});
    return nodes;
}

}  // namespace detail

// Crop a square window of 1.5x the init polygon's bounding-box long side
// around its center, resize bilinearly to U x V and transform all polygons
// into patch coordinates. Windows reaching past the image edge are padded
// by edge replication and flagged in meta.
inline Instance ingest_one(const ImageU8& img, const std::string& id, const Contour& gt_world,
                           const Contour& init_world, int U, int V,
                           const std::string& source = "ingest") {
    check_contour(gt_world);
    check_contour(init_world);
    for (const Vec2& p : gt_world.nodes)
        if (p.u < 0 || p.v < 0 || p.u > img.width - 1 || p.v > img.height - 1)
            throw std::runtime_error("ingest: polygon outside image for id " + id);

    double lo_u = 1e300, hi_u = -1e300, lo_v = 1e300, hi_v = -1e300;
    for (const Vec2& p : init_world.nodes) {
        lo_u = std::min(lo_u, p.u);
        hi_u = std::max(hi_u, p.u);
        lo_v = std::min(lo_v, p.v);
        hi_v = std::max(hi_v, p.v);
    }
    const double side = 1.5 * std::max(hi_u - lo_u, hi_v - lo_v);
    if (side <= 0.0) throw std::runtime_error("ingest: degenerate init polygon for id " + id);
    const double cu = 0.5 * (lo_u + hi_u), cv = 0.5 * (lo_v + hi_v);
    const double u0 = cu - 0.5 * side, v0 = cv - 0.5 * side;
    const double scale = static_cast<double>(U) / side;

    Instance inst;
    inst.id = id;
    inst.meta.source = source;
    inst.meta.scale_factor = scale;
    inst.meta.crop_u0 = u0;
    inst.meta.crop_v0 = v0;
    inst.meta.edge_padded = u0 < 0.0 || v0 < 0.0 || u0 + side > img.width - 1 ||
                            v0 + side > img.height - 1;

    const int d = img.channels >= 3 ? 3 : 1;
    inst.patch = Patch(U, V, d);
    for (int ch = 0; ch < d; ++ch)
        for (int j = 0; j < V; ++j)
            for (int i = 0; i < U; ++i)
                inst.patch.at(ch, j, i) = detail::quantize01(
                    detail::sample_image_bilinear(img, ch, u0 + i / scale, v0 + j / scale));

    auto to_patch = [&](const Contour& c) {
        Contour out = c;
        for (Vec2& p : out.nodes)
            p = clamp_to_bounds({(p.u - u0) * scale, (p.v - v0) * scale}, U, V);
        return out;
    };
    inst.gt = to_patch(gt_world);
    inst.init = to_patch(init_world);
    return inst;
}

// Maps a patch-coordinate contour back to world pixel coordinates.
inline Contour to_world(const Contour& c, const InstanceMeta& meta) {
    Contour out = c;
    for (Vec2& p : out.nodes)
        p = {meta.crop_u0 + p.u / meta.scale_factor, meta.crop_v0 + p.v / meta.scale_factor};
    return out;
}

// polygon_file: JSON lines, one {"id", "image", "nodes", ["init"]} object
// per instance; "nodes" is the ground-truth polygon in world pixels. When
// "init" is absent, a circle at the ground-truth centroid with radius half
// the bounding-box long side stands in for the manual click.
inline std::vector<Instance> ingest(const std::string& image_dir, const std::string& polygon_file,
                                    int U, int V, int init_nodes = 60) {
    std::ifstream f(polygon_file);
    if (!f) throw std::runtime_error("ingest: cannot open " + polygon_file);
    std::vector<Instance> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const nlohmann::json j = nlohmann::json::parse(line);
        const std::string id = j.at("id").get<std::string>();
        if (!j.contains("image"))
            throw std::runtime_error("ingest: record " + id + " missing image reference");
        const std::string img_path = image_dir + "/" + j.at("image").get<std::string>();
        const ImageU8 img = read_png(img_path);
        const Contour gt = detail::contour_from_json(j.at("nodes"));
        Contour init;
        if (j.contains("init")) {
            init = detail::contour_from_json(j.at("init"));
        } else {
            const Vec2 ctr = centroid(gt);
            double lo_u = 1e300, hi_u = -1e300, lo_v = 1e300, hi_v = -1e300;
            for (const Vec2& p : gt.nodes) {
                lo_u = std::min(lo_u, p.u);
                hi_u = std::max(hi_u, p.u);
                lo_v = std::min(lo_v, p.v);
                hi_v = std::max(hi_v, p.v);
            }
            const double r = 0.5 * std::max(hi_u - lo_u, hi_v - lo_v);
            init = init_circle(ctr, std::max(r, 2.0), init_nodes);
        }
        out.push_back(ingest_one(img, id, gt, init, U, V));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dataset directory layout

inline ImageU8 patch_to_image(const Patch& p) {
    ImageU8 img(p.width, p.height, p.channels);
    for (int v = 0; v < p.height; ++v)
        for (int u = 0; u < p.width; ++u)
            for (int c = 0; c < p.channels; ++c)
                img.at(u, v, c) = static_cast<uint8_t>(
                    std::lround(std::clamp(static_cast<double>(p.at(c, v, u)), 0.0, 1.0) * 255.0));
    return img;
}

inline Patch image_to_patch(const ImageU8& img) {
    Patch p(img.width, img.height, img.channels);
    for (int v = 0; v < img.height; ++v)
        for (int u = 0; u < img.width; ++u)
            for (int c = 0; c < img.channels; ++c)
                p.at(c, v, u) = static_cast<float>(img.at(u, v, c)) / 255.0f;
    return p;
}

struct Dataset {
    std::vector<Instance> train;
    std::vector<Instance> test;
    nlohmann::json config;  // generation config, free-form
};

inline void save_dataset(const Dataset& ds, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir + "/patches");
    std::ofstream poly(dir + "/polygons.jsonl", std::ios::trunc);
    if (!poly) throw std::runtime_error("save_dataset: cannot write polygons.jsonl");
    nlohmann::json train_ids = nlohmann::json::array(), test_ids = nlohmann::json::array();

    auto dump_split = [&](const std::vector<Instance>& insts, const char* split,
                          nlohmann::json& ids) {
        for (const Instance& inst : insts) {
            write_png(dir + "/patches/" + inst.id + ".png", patch_to_image(inst.patch));
            nlohmann::json rec = {{"id", inst.id},
                                  {"split", split},
                                  {"gt", detail::contour_to_json(inst.gt)},
                                  {"init", detail::contour_to_json(inst.init)},
                                  {"source", inst.meta.source},
                                  {"scale_factor", inst.meta.scale_factor},
                                  {"crop_origin", {inst.meta.crop_u0, inst.meta.crop_v0}},
                                  {"edge_padded", inst.meta.edge_padded}};
            poly << rec.dump() << "\n";
            ids.push_back(inst.id);
        }
    };
    dump_split(ds.train, "train", train_ids);
    dump_split(ds.test, "test", test_ids);

    nlohmann::json manifest = {{"config", ds.config},
                               {"train_ids", train_ids},
                               {"test_ids", test_ids},
                               {"n_train", ds.train.size()},
                               {"n_test", ds.test.size()}};
    std::ofstream mf(dir + "/manifest.json", std::ios::trunc);
    mf << manifest.dump(2) << "\n";
}

inline Dataset load_dataset(const std::string& dir) {
    std::ifstream poly(dir + "/polygons.jsonl");
    if (!poly) throw std::runtime_error("load_dataset: cannot open " + dir + "/polygons.jsonl");
    Dataset ds;
    std::ifstream mf(dir + "/manifest.json");
    if (mf) ds.config = nlohmann::json::parse(mf).value("config", nlohmann::json::object());

    std::string line;
    while (std::getline(poly, line)) {
        if (line.empty()) continue;
        const nlohmann::json j = nlohmann::json::parse(line);
        Instance inst;
        inst.id = j.at("id").get<std::string>();
        inst.gt = detail::contour_from_json(j.at("gt"));
        inst.init = detail::contour_from_json(j.at("init"));
        inst.meta.source = j.value("source", std::string("unknown"));
        inst.meta.scale_factor = j.value("scale_factor", 1.0);
        if (j.contains("crop_origin")) {
            inst.meta.crop_u0 = j.at("crop_origin").at(0).get<double>();
            inst.meta.crop_v0 = j.at("crop_origin").at(1).get<double>();
        }
        inst.meta.edge_padded = j.value("edge_padded", false);
        inst.patch = image_to_patch(read_png(dir + "/patches/" + inst.id + ".png"));
        const std::string split = j.value("split", std::string("train"));
        (split == "test" ? ds.test : ds.train).push_back(std::move(inst));
    }
    return ds;
}

}  // namespace dsac
