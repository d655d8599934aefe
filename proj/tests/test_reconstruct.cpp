#include <catch2/catch.hpp>

#include <cmath>

#include "lane3d/annotate.hpp"
#include "lane3d/reconstruct.hpp"
#include "lane3d/rng.hpp"
#include "lane3d/synthetic.hpp"

using namespace lane3d;

namespace {

RowAnchors constant_anchors(int rows, double alpha, double beta) {
    RowAnchors a;
    a.alpha.assign(rows, alpha);
    a.beta.assign(rows, beta);
    return a;
}

}  // namespace

TEST_CASE("apply_offsets with zero maps is the identity") {
    OffsetMaps offsets(64, 48);
    std::vector<PixelSeed> seeds{{10, 20}, {63, 47}, {0, 0}};
    const auto refined = apply_offsets(seeds, offsets);
    REQUIRE(refined.size() == 3);
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        CHECK(refined[i].u == static_cast<double>(seeds[i].u));
        CHECK(refined[i].v == static_cast<double>(seeds[i].v));
        CHECK_FALSE(refined[i].clamped);
    }
}

TEST_CASE("apply_offsets adds the per-pixel deltas") {
    OffsetMaps offsets(256, 256);
    for (auto& v : offsets.delta_u.cells()) v = 0.5;
    const auto refined = apply_offsets(std::vector<PixelSeed>{{100, 200}}, offsets);
    CHECK(refined[0].u == Approx(100.5));
    CHECK(refined[0].v == Approx(200.0));
}

TEST_CASE("apply_offsets clamps out-of-image refinements and flags them") {
    OffsetMaps offsets(64, 64);
    for (auto& v : offsets.delta_u.cells()) v = 10.0;
    const auto refined = apply_offsets(std::vector<PixelSeed>{{60, 10}}, offsets);
    CHECK(refined[0].u == 63.0);
    CHECK(refined[0].clamped);
}

TEST_CASE("apply_offsets rejects seeds outside the raster") {
    OffsetMaps offsets(64, 64);
    CHECK_THROWS_AS(apply_offsets(std::vector<PixelSeed>{{-1, 0}}, offsets), OutOfBounds);
    CHECK_THROWS_AS(apply_offsets(std::vector<PixelSeed>{{0, 64}}, offsets), OutOfBounds);
}

TEST_CASE("decode_depth evaluates alpha + beta * delta_z") {
    const auto anchors = constant_anchors(10, 20.0, 5.0);
    CHECK(decode_depth(3, 0.4, anchors) == Approx(22.0).margin(1e-12));
    CHECK(decode_depth(3, 0.0, anchors) == 20.0);
}

TEST_CASE("decode_depth rejects non-positive results and bad rows") {
    const auto anchors = constant_anchors(10, 1.0, 5.0);
    CHECK_THROWS_AS(decode_depth(2, -1.0, anchors), NonPositiveDepth);
    CHECK_THROWS_AS(decode_depth(10, 0.0, anchors), OutOfBounds);
}

TEST_CASE("encode then decode is the identity to 1e-12") {
    Rng rng(5);
    for (int i = 0; i < 500; ++i) {
        const auto anchors = constant_anchors(4, rng.uniform(1.0, 80.0), rng.uniform(0.1, 10.0));
        const double z = rng.uniform(0.1, 150.0);
        const double delta = encode_depth(1, z, anchors);
        CHECK(decode_depth(1, delta, anchors) == Approx(z).margin(1e-12));
    }
}

TEST_CASE("fit_row_anchors on a constant map floors beta") {
    DepthMap map(32, 8);
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 32; ++c) map.set(r, c, 10.0);
    const RowAnchors anchors = fit_row_anchors(std::vector<DepthMap>{map});
    for (int r = 0; r < 8; ++r) {
        CHECK(anchors.alpha[r] == Approx(10.0).margin(1e-12));
        CHECK(anchors.beta[r] == Approx(0.1).margin(1e-12));
    }
}

TEST_CASE("fit_row_anchors averages across maps") {
    DepthMap a(8, 4), b(8, 4);
    for (int c = 0; c < 8; ++c) {
        a.set(1, c, 10.0);
        b.set(1, c, 20.0);
        a.set(3, c, 30.0);
        b.set(3, c, 30.0);
    }
    const RowAnchors anchors = fit_row_anchors(std::vector<DepthMap>{a, b});
    CHECK(anchors.alpha[1] == Approx(15.0).margin(1e-12));
    CHECK(anchors.beta[1] == Approx(5.0).margin(1e-12));
    CHECK(anchors.alpha[3] == Approx(30.0).margin(1e-12));
    CHECK(anchors.beta[3] == Approx(0.1).margin(1e-12));
    CHECK(anchors.alpha[2] == Approx(22.5).margin(1e-9));  // interpolated gap row
}

TEST_CASE("fit_row_anchors interpolates empty rows between fitted ones") {
    DepthMap map(8, 5);
    for (int c = 0; c < 8; ++c) {
        map.set(0, c, 10.0);
        map.set(4, c, 30.0);
    }
    const RowAnchors anchors = fit_row_anchors(std::vector<DepthMap>{map});
    CHECK(anchors.alpha[1] == Approx(15.0).margin(1e-9));
    CHECK(anchors.alpha[2] == Approx(20.0).margin(1e-9));
    CHECK(anchors.alpha[3] == Approx(25.0).margin(1e-9));
    for (int r = 0; r < 5; ++r) CHECK(anchors.beta[r] > 0.0);
}

TEST_CASE("fit_row_anchors needs at least two rows of data") {
    DepthMap map(8, 5);
    for (int c = 0; c < 8; ++c) map.set(2, c, 10.0);
    CHECK_THROWS_AS(fit_row_anchors(std::vector<DepthMap>{map}), InsufficientData);
}

TEST_CASE("fit_row_anchors tracks the analytic flat-ground depth within 2 percent") {
    // Scatter ground returns of a flat scene into a sparse depth map.
    TerrainModel flat;
    flat.base_height = 1.6;
    RigidTransform extr;
    extr.translation = Eigen::Vector3d(0.0, -0.35, -0.2);
    const CameraIntrinsics k{1000.0, 1000.0, 639.5, 359.5, 0.0};
    const LidarSweep sweep = simulate_lidar(flat, extr, 64, 0.25);
    std::vector<std::uint32_t> all(sweep.size());
    for (std::uint32_t i = 0; i < all.size(); ++i) all[i] = i;
    const auto projected = project_ground_to_image(sweep, all, extr, k, {1280, 720});
    DepthMap sparse(1280, 720);
    std::vector<char> row_from_data(720, 0);
    for (const ProjectedPoint& p : projected) {
        const int r = static_cast<int>(std::lround(p.v));
        const int c = static_cast<int>(std::lround(p.u));
        if (!sparse.values.contains(r, c)) continue;
        if (!sparse.is_valid(r, c)) sparse.set(r, c, p.camera.z);
        row_from_data[r] = 1;
    }
    const RowAnchors anchors = fit_row_anchors(std::vector<DepthMap>{sparse});
    for (int r = 420; r < 700; ++r) {
        if (!row_from_data[r]) continue;
        const double analytic = 1.6 * k.fy / (r - k.cy);
        CHECK(anchors.alpha[r] == Approx(analytic).epsilon(0.02));
    }
}

TEST_CASE("complete_depth leaves dense maps untouched and is idempotent") {
    DepthMap dense(16, 12);
    Rng rng(8);
    for (int r = 0; r < 12; ++r)
        for (int c = 0; c < 16; ++c) dense.set(r, c, rng.uniform(1.0, 50.0));
    CHECK(complete_depth(dense) == dense);

    DepthMap sparse(16, 12);
    sparse.set(3, 5, 7.0);
    sparse.set(9, 11, 9.0);
    const DepthMap once = complete_depth(sparse);
    CHECK(complete_depth(once) == once);
}

TEST_CASE("complete_depth broadcasts a single valid pixel everywhere") {
    DepthMap sparse(8, 6);
    sparse.set(2, 3, 10.0);
    const DepthMap dense = complete_depth(sparse);
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 8; ++c) CHECK(dense.at(r, c) == 10.0);
}

TEST_CASE("complete_depth preserves valid pixels and the value range") {
    Rng rng(13);
    DepthMap sparse(40, 30);
    double lo = 1e300, hi = 0.0;
    for (int i = 0; i < 120; ++i) {
        const int r = static_cast<int>(rng.uniform_index(30));
        const int c = static_cast<int>(rng.uniform_index(40));
        const double d = rng.uniform(2.0, 60.0);
        sparse.values.at(r, c) = d;
        lo = std::min(lo, sparse.at(r, c));
        hi = std::max(hi, sparse.at(r, c));
    }
    const DepthMap dense = complete_depth(sparse);
    for (int r = 0; r < 30; ++r)
        for (int c = 0; c < 40; ++c) {
            CHECK(dense.is_valid(r, c));
            if (sparse.is_valid(r, c)) CHECK(dense.at(r, c) == sparse.at(r, c));
            CHECK(dense.at(r, c) >= lo);
            CHECK(dense.at(r, c) <= hi);
        }
}

TEST_CASE("complete_depth rejects an all-missing map") {
    CHECK_THROWS_AS(complete_depth(DepthMap(8, 8)), EmptyDepth);
}

TEST_CASE("checkerboard-sparse ground depth completes to the analytic surface within 0.2 m") {
    const CameraIntrinsics k{1000.0, 1000.0, 639.5, 359.5, 0.0};
    const int w = 320, h = 240;
    auto analytic = [&](int r) { return 1.6 * 250.0 / (r - 59.5 + 1.0); };  // scaled-down flat ground
    DepthMap truth(w, h), sparse(w, h);
    for (int r = 70; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            truth.set(r, c, analytic(r));
            if ((r + c) % 2 == 0) sparse.set(r, c, analytic(r));
        }
    const DepthMap dense = complete_depth(sparse);
    double worst = 0.0;
    for (int r = 70; r < h; ++r)
        for (int c = 0; c < w; ++c) worst = std::max(worst, std::abs(dense.at(r, c) - truth.at(r, c)));
    CHECK(worst < 0.2);
    (void)k;
}

TEST_CASE("lift_to_lanes on an empty mask returns an empty list") {
    SegmentationMask mask(64, 48);
    OffsetMaps offsets(64, 48);
    const auto anchors = constant_anchors(48, 10.0, 1.0);
    CHECK(lift_to_lanes(mask, offsets, anchors, CameraIntrinsics{100, 100, 32, 24}).empty());
}

TEST_CASE("a vertical constant-depth column lifts to a zero-x-spread lane") {
    const CameraIntrinsics k{1000.0, 1000.0, 639.5, 359.5, 0.0};
    SegmentationMask mask(1280, 720);
    for (int r = 400; r < 700; ++r) mask.set(r, 444);
    OffsetMaps offsets(1280, 720);
    const auto anchors = constant_anchors(720, 12.0, 1.0);
    LiftConfig cfg;
    cfg.smooth = false;
    const auto lanes = lift_to_lanes(mask, offsets, anchors, k, cfg);
    REQUIRE(lanes.size() == 1);
    REQUIRE(lanes[0].points.size() == 300);
    double min_x = 1e300, max_x = -1e300;
    for (const Point3& p : lanes[0].points) {
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
        CHECK(p.z == 12.0);
    }
    CHECK(max_x - min_x < 1e-6);
    // Eq. 5 arithmetic for the column: x = z (u - cx) / fx.
    CHECK(lanes[0].points[0].x == Approx(12.0 * (444 - 639.5) / 1000.0).margin(1e-9));
    // Ordered near to far: bottom rows first.
    CHECK(lanes[0].points.front().y > lanes[0].points.back().y);
}

TEST_CASE("lift with exact offsets and depths reproduces the rendered lane") {
    // One-pixel-wide zigzag column with known sub-pixel truth.
    const CameraIntrinsics k{1000.0, 1000.0, 639.5, 359.5, 0.0};
    SegmentationMask mask(1280, 720);
    OffsetMaps offsets(1280, 720);
    RowAnchors anchors = constant_anchors(720, 15.0, 2.0);
    std::vector<Point3> truth;
    for (int r = 500; r < 680; ++r) {
        const double v_true = r + 0.25;
        const double z_true = 1.6 * k.fy / (v_true - k.cy);
        const double u_true = 639.5 + 0.002 * (r - 500) * (r - 500) * 0.25;
        const int c = static_cast<int>(std::lround(u_true));
        mask.set(r, c);
        offsets.delta_u.at(r, c) = u_true - c;
        offsets.delta_v.at(r, c) = 0.25;
        offsets.delta_z.at(r, c) = encode_depth(r, z_true, anchors);
        truth.push_back(backproject(u_true, v_true, z_true, k));
    }
    LiftConfig cfg;
    cfg.smooth = false;
    const auto lanes = lift_to_lanes(mask, offsets, anchors, k, cfg);
    REQUIRE(lanes.size() == 1);
    REQUIRE(lanes[0].points.size() == truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i)
        CHECK(distance(lanes[0].points[i], truth[truth.size() - 1 - i]) < 1e-6);
}

TEST_CASE("aligned dashed segments merge into one lane instance") {
    const CameraIntrinsics k{1000.0, 1000.0, 639.5, 359.5, 0.0};
    SegmentationMask mask(1280, 720);
    for (int r = 560; r < 660; ++r) mask.set(r, 700);  // near dash
    for (int r = 430; r < 520; ++r) mask.set(r, 700);  // far dash, same column
    OffsetMaps offsets(1280, 720);
    RowAnchors anchors;
    for (int r = 0; r < 720; ++r) {
        const double z = r > 360 ? 1.6 * k.fy / (r + 0.0 - k.cy) : 500.0;
        anchors.alpha.push_back(z);
        anchors.beta.push_back(1.0);
    }
    const auto lanes = lift_to_lanes(mask, offsets, anchors, k);
    CHECK(lanes.size() == 1);
}

TEST_CASE("misaligned segments stay separate lanes") {
    const CameraIntrinsics k{1000.0, 1000.0, 639.5, 359.5, 0.0};
    SegmentationMask mask(1280, 720);
    for (int r = 560; r < 660; ++r) mask.set(r, 700);
    for (int r = 430; r < 520; ++r) mask.set(r, 200);  // far dash, way off to the side
    OffsetMaps offsets(1280, 720);
    RowAnchors anchors;
    for (int r = 0; r < 720; ++r) {
        const double z = r > 360 ? 1.6 * k.fy / (r + 0.0 - k.cy) : 500.0;
        anchors.alpha.push_back(z);
        anchors.beta.push_back(1.0);
    }
    const auto lanes = lift_to_lanes(mask, offsets, anchors, k);
    CHECK(lanes.size() == 2);
}
