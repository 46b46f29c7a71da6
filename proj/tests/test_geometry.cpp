#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "dsac/geometry.hpp"
#include "oracles.hpp"

using namespace dsac;

namespace {
Contour square(double x0, double y0, double x1, double y1) {
    return Contour({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}});
}
}  // namespace

TEST_CASE("signed_area basics") {
    CHECK(signed_area(square(0, 0, 1, 1)) == Catch::Approx(1.0));

    Contour collinear({{0, 0}, {1, 1}, {2, 2}, {3, 3}});
    CHECK(signed_area(collinear) == Catch::Approx(0.0).margin(1e-12));

    Contour tri({{0, 0}, {4, 0}, {0, 3}});
    CHECK_THROWS_AS(signed_area(tri), std::invalid_argument);
}

TEST_CASE("signed_area agrees with raster cardinality on random polygons") {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 20; ++trial) {
        const Contour c = oracle::random_polygon(rng, 10, {32, 32}, 8, 24);
        const double area = std::abs(signed_area(c));
        const double cells = static_cast<double>(rasterize(c, 64, 64).count());
        CHECK(std::abs(area - cells) <= perimeter(c) / 2.0 + 1e-9);
    }
}

TEST_CASE("rasterize exact axis-aligned case") {
    // square covering pixel centers (1,1) .. (3,3)
    const RasterMask m = rasterize(square(0.5, 0.5, 3.5, 3.5), 6, 6);
    CHECK(m.count() == 9);
    for (int v = 1; v <= 3; ++v)
        for (int u = 1; u <= 3; ++u) CHECK(m.at(u, v) == 1);
}

TEST_CASE("rasterize sub-pixel polygon is empty") {
    const RasterMask m = rasterize(square(3.1, 3.1, 3.9, 3.9), 8, 8);
    CHECK(m.count() == 0);
}

TEST_CASE("rasterize matches brute-force point-in-polygon") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        Contour tri;
        for (int k = 0; k < 3; ++k)
            tri.nodes.push_back({oracle::urand(rng, 1, 30), oracle::urand(rng, 1, 30)});
        tri.nodes.push_back(tri.nodes.back());  // 4-node minimum, repeated vertex
        const RasterMask got = rasterize(tri, 32, 32);
        const RasterMask want = oracle::pip_brute(tri, 32, 32);
        REQUIRE(got.inside == want.inside);
    }
    // larger star-shaped polygons, including self-touching configurations
    for (int trial = 0; trial < 20; ++trial) {
        const Contour c = oracle::random_polygon(rng, 12, {24, 20}, 4, 18);
        REQUIRE(rasterize(c, 48, 48).inside == oracle::pip_brute(c, 48, 48).inside);
    }
}

TEST_CASE("iou analytic cases") {
    CHECK(iou(square(2.5, 2.5, 10.5, 10.5), square(2.5, 2.5, 10.5, 10.5), 16, 16) == 1.0);
    CHECK(iou(square(0.5, 0.5, 3.5, 3.5), square(8.5, 8.5, 11.5, 11.5), 16, 16) == 0.0);
    // half overlap of two equal 4x8 squares: intersection 16, union 48
    const Contour a = square(0.5, 0.5, 8.5, 4.5);
    const Contour b = square(4.5, 0.5, 12.5, 4.5);
    CHECK(iou(a, b, 16, 8) == Catch::Approx(1.0 / 3.0));
}

TEST_CASE("iou of two empty masks is 1 by convention") {
    const Contour tiny = square(3.2, 3.2, 3.8, 3.8);
    CHECK(iou(tiny, tiny, 8, 8) == 1.0);
}

TEST_CASE("init_circle cardinal points and symmetry") {
    const Contour c = init_circle({64, 64}, 20, 4, 128, 128);
    REQUIRE(c.size() == 4);
    CHECK(c.nodes[0].u == Catch::Approx(84));
    CHECK(c.nodes[0].v == Catch::Approx(64).margin(1e-9));
    CHECK(c.nodes[1].u == Catch::Approx(64).margin(1e-9));
    CHECK(c.nodes[1].v == Catch::Approx(84));
    CHECK(c.nodes[2].u == Catch::Approx(44));
    CHECK(c.nodes[3].v == Catch::Approx(44));

    const Contour c60 = init_circle({40, 40}, 17, 60);
    double spacing = (c60.at(1) - c60.at(0)).norm();
    for (int s = 0; s < 60; ++s)
        CHECK((c60.at(s + 1) - c60.at(s)).norm() == Catch::Approx(spacing).margin(1e-9));
}

TEST_CASE("init_circle clamps to bounds") {
    const Contour c = init_circle({2, 2}, 10, 16, 64, 64);
    for (const Vec2& p : c.nodes) {
        CHECK(p.u >= 0.0);
        CHECK(p.v >= 0.0);
    }
}

TEST_CASE("circular shift invariance of area, raster, iou") {
    std::mt19937_64 rng(11);
    const Contour c = oracle::random_polygon(rng, 9, {20, 20}, 5, 14);
    for (int shift : {1, 3, 7}) {
        Contour shifted;
        for (int s = 0; s < c.size(); ++s) shifted.nodes.push_back(c.at(s + shift));
        CHECK(signed_area(shifted) == Catch::Approx(signed_area(c)));
        CHECK(rasterize(shifted, 40, 40).inside == rasterize(c, 40, 40).inside);
        CHECK(iou(shifted, c, 40, 40) == 1.0);
    }
}

TEST_CASE("orientation reversal negates area, keeps raster") {
    std::mt19937_64 rng(13);
    const Contour c = oracle::random_polygon(rng, 8, {16, 16}, 4, 12);
    Contour rev = c;
    std::reverse(rev.nodes.begin(), rev.nodes.end());
    CHECK(signed_area(rev) == Catch::Approx(-signed_area(c)));
    CHECK(rasterize(rev, 32, 32).inside == rasterize(c, 32, 32).inside);
}

TEST_CASE("iou symmetry and identity-of-masks") {
    std::mt19937_64 rng(17);
    const Contour a = oracle::random_polygon(rng, 7, {16, 16}, 4, 12);
    const Contour b = oracle::random_polygon(rng, 7, {18, 14}, 4, 12);
    CHECK(iou(a, b, 32, 32) == Catch::Approx(iou(b, a, 32, 32)));
    const double self = iou(a, a, 32, 32);
    CHECK(self == 1.0);
}

TEST_CASE("resample_closed keeps perimeter and orientation") {
    const Contour rect = square(4, 4, 20, 12);
    const Contour r = resample_closed(rect, 24);
    REQUIRE(r.size() == 24);
    CHECK(perimeter(r) == Catch::Approx(perimeter(rect)).epsilon(0.01));
    CHECK(signed_area(r) > 0.0);
    CHECK(iou(r, rect, 32, 32) == Catch::Approx(1.0).margin(0.05));
    // equal spacing
    const double d0 = (r.at(1) - r.at(0)).norm();
    for (int s = 0; s < r.size(); ++s)
        CHECK((r.at(s + 1) - r.at(s)).norm() == Catch::Approx(d0).margin(1e-9));
}

TEST_CASE("ensure_ccw") {
    Contour cw = square(0, 0, 4, 4);
    std::reverse(cw.nodes.begin(), cw.nodes.end());
    REQUIRE(signed_area(cw) < 0.0);
    CHECK(signed_area(ensure_ccw(cw)) > 0.0);
}
