#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <random>
#include <set>

#include "dsac/dataset.hpp"
#include "oracles.hpp"

using namespace dsac;

namespace {

// proper crossing test between segments; shared endpoints don't count
bool segments_cross(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
    auto orient = [](Vec2 p, Vec2 q, Vec2 r) {
        return (q.u - p.u) * (r.v - p.v) - (q.v - p.v) * (r.u - p.u);
    };
    const double o1 = orient(a, b, c), o2 = orient(a, b, d);
    const double o3 = orient(c, d, a), o4 = orient(c, d, b);
    return ((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0)) && o1 != 0 && o2 != 0 && o3 != 0 &&
           o4 != 0;
}

bool has_self_intersection(const Contour& c) {
    const int L = c.size();
    for (int i = 0; i < L; ++i)
        for (int j = i + 1; j < L; ++j) {
            if (j == i || (j + 1) % L == i || (i + 1) % L == j) continue;
            if (segments_cross(c.at(i), c.at(i + 1), c.at(j), c.at(j + 1))) return true;
        }
    return false;
}

}  // namespace

TEST_CASE("clean render: thresholded image equals the ground-truth mask") {
    SynthConfig cfg;
    cfg.n = 5;
    cfg.size = 64;
    cfg.family = ShapeFamily::axis_rect;
    cfg.noise_sigma = 0.0;
    cfg.texture = TextureKind::flat;
    cfg.seed = 21;
    for (const Instance& inst : generate_synthetic(cfg)) {
        float lo = 1.0f, hi = 0.0f;
        for (float v : inst.patch.pixels) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        const float thr = 0.5f * (lo + hi);
        RasterMask img_mask(64, 64);
        for (int v = 0; v < 64; ++v)
            for (int u = 0; u < 64; ++u) img_mask.at(u, v) = inst.patch.at(0, v, u) > thr;
        CHECK(mask_iou(img_mask, rasterize(inst.gt, 64, 64)) == 1.0);
    }
}

TEST_CASE("generation is deterministic for a fixed seed") {
    SynthConfig cfg;
    cfg.n = 8;
    cfg.size = 32;
    cfg.seed = 99;
    cfg.noise_sigma = 0.15;
    cfg.texture = TextureKind::speckle;
    const auto a = generate_synthetic(cfg);
    const auto b = generate_synthetic(cfg);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].id == b[i].id);
        CHECK(a[i].patch.pixels == b[i].patch.pixels);
        REQUIRE(a[i].gt.size() == b[i].gt.size());
        for (int s = 0; s < a[i].gt.size(); ++s) {
            CHECK(a[i].gt.at(s).u == b[i].gt.at(s).u);
            CHECK(a[i].gt.at(s).v == b[i].gt.at(s).v);
        }
    }
}

TEST_CASE("n=200 gives exactly 200 instances with unique ids") {
    SynthConfig cfg;
    cfg.n = 200;
    cfg.size = 32;
    cfg.seed = 3;
    const auto insts = generate_synthetic(cfg);
    REQUIRE(insts.size() == 200);
    std::set<std::string> ids;
    for (const auto& inst : insts) ids.insert(inst.id);
    CHECK(ids.size() == 200);
}

TEST_CASE("l-shape family gives 6-vertex ground truth polygons") {
    SynthConfig cfg;
    cfg.n = 12;
    cfg.size = 48;
    cfg.family = ShapeFamily::lshape;
    cfg.seed = 5;
    for (const Instance& inst : generate_synthetic(cfg)) CHECK(inst.gt.size() == 6);
}

TEST_CASE("synthetic ground truth polygons are simple and CCW") {
    SynthConfig cfg;
    cfg.n = 40;
    cfg.size = 48;
    cfg.family = ShapeFamily::mixed;
    cfg.seed = 6;
    for (const Instance& inst : generate_synthetic(cfg)) {
        CHECK_FALSE(has_self_intersection(inst.gt));
        CHECK(signed_area(inst.gt) > 0.0);
        for (const Vec2& p : inst.gt.nodes) {
            CHECK(p.u >= 0.0);
            CHECK(p.u <= 47.0);
            CHECK(p.v >= 0.0);
            CHECK(p.v <= 47.0);
        }
    }
}

TEST_CASE("ingest crop arithmetic and inverse transform") {
    // synthetic world image with a gradient so resampling is non-trivial
    ImageU8 img(256, 256, 3);
    for (int v = 0; v < 256; ++v)
        for (int u = 0; u < 256; ++u)
            for (int c = 0; c < 3; ++c)
                img.at(u, v, c) = static_cast<uint8_t>((u + v + 40 * c) % 256);

    const Contour init = Contour({{108, 108}, {148, 108}, {148, 148}, {108, 148}});  // 40x40 bbox
    const Contour gt =
        Contour({{112.25, 110.5}, {145.75, 111.5}, {143.5, 146.25}, {109.5, 144.0}});
    const Instance inst = ingest_one(img, "probe", gt, init, 128, 128);

    CHECK(inst.meta.scale_factor == Catch::Approx(128.0 / 60.0));
    CHECK_FALSE(inst.meta.edge_padded);
    CHECK(inst.patch.width == 128);

    // patch -> world round trip
    const Contour back = to_world(inst.gt, inst.meta);
    for (int s = 0; s < gt.size(); ++s) {
        CHECK(back.at(s).u == Catch::Approx(gt.at(s).u).margin(1e-6));
        CHECK(back.at(s).v == Catch::Approx(gt.at(s).v).margin(1e-6));
    }
}

TEST_CASE("ingest flags edge-padded crops") {
    ImageU8 img(100, 100, 3);
    const Contour init = Contour({{2, 2}, {42, 2}, {42, 42}, {2, 42}});
    const Contour gt = Contour({{6, 6}, {38, 6}, {38, 38}, {6, 38}});
    const Instance inst = ingest_one(img, "edge", gt, init, 64, 64);
    CHECK(inst.meta.edge_padded);
}

TEST_CASE("ingest rejects polygons outside the image") {
    ImageU8 img(64, 64, 3);
    const Contour bad = Contour({{-5, 10}, {30, 10}, {30, 30}, {-5, 30}});
    const Contour init = Contour({{10, 10}, {30, 10}, {30, 30}, {10, 30}});
    CHECK_THROWS(ingest_one(img, "bad", bad, init, 32, 32));
}

TEST_CASE("split reproduces the paper's 100/68 partition") {
    SynthConfig cfg;
    cfg.n = 168;
    cfg.size = 16;
    cfg.seed = 8;
    auto insts = generate_synthetic(cfg);
    const auto [train, test] = split(std::move(insts), {0.595, 0.405}, 7);
    CHECK(train.size() == 100);
    CHECK(test.size() == 68);

    std::set<std::string> seen;
    for (const auto& i : train) seen.insert(i.id);
    for (const auto& i : test) seen.insert(i.id);
    CHECK(seen.size() == 168);
}

TEST_CASE("split is deterministic in the seed") {
    SynthConfig cfg;
    cfg.n = 30;
    cfg.size = 16;
    cfg.seed = 9;
    auto a = split(generate_synthetic(cfg), {0.5, 0.5}, 123);
    auto b = split(generate_synthetic(cfg), {0.5, 0.5}, 123);
    REQUIRE(a.first.size() == b.first.size());
    for (size_t i = 0; i < a.first.size(); ++i) CHECK(a.first[i].id == b.first[i].id);
}

TEST_CASE("dataset directory round-trips instances exactly") {
    namespace fs = std::filesystem;
    const std::string dir = fs::temp_directory_path() / "dsac_ds_test";
    fs::remove_all(dir);

    SynthConfig cfg;
    cfg.n = 6;
    cfg.size = 32;
    cfg.seed = 10;
    cfg.noise_sigma = 0.08;
    Dataset ds;
    auto all = generate_synthetic(cfg);
    ds.train.assign(all.begin(), all.begin() + 4);
    ds.test.assign(all.begin() + 4, all.end());
    ds.config = cfg.to_json();
    save_dataset(ds, dir);

    const Dataset back = load_dataset(dir);
    REQUIRE(back.train.size() == 4);
    REQUIRE(back.test.size() == 2);
    for (size_t i = 0; i < back.train.size(); ++i) {
        const Instance& a = ds.train[i];
        const Instance& b = back.train[i];
        CHECK(a.id == b.id);
        CHECK(a.patch.pixels == b.patch.pixels);  // quantized at generation
        REQUIRE(a.gt.size() == b.gt.size());
        for (int s = 0; s < a.gt.size(); ++s) {
            CHECK(a.gt.at(s).u == b.gt.at(s).u);
            CHECK(a.gt.at(s).v == b.gt.at(s).v);
        }
        CHECK(a.meta.scale_factor == b.meta.scale_factor);
    }
    fs::remove_all(dir);
}

TEST_CASE("png write/read round trip") {
    namespace fs = std::filesystem;
    const std::string path = fs::temp_directory_path() / "dsac_png_test.png";
    std::mt19937_64 rng(11);
    ImageU8 img(37, 23, 3);
    for (auto& b : img.data) b = static_cast<uint8_t>(rng() & 0xff);
    write_png(path, img);
    const ImageU8 back = read_png(path);
    CHECK(back.width == 37);
    CHECK(back.height == 23);
    CHECK(back.channels == 3);
    CHECK(back.data == img.data);
    fs::remove(path);
}
