#include <catch2/catch.hpp>

#include <algorithm>
#include <cmath>

#include "lane3d/annotate.hpp"
#include "lane3d/metric.hpp"
#include "lane3d/synthetic.hpp"

using namespace lane3d;

namespace {

constexpr ImageSize kSize{1280, 720};
const CameraIntrinsics kCam{1000.0, 1000.0, 639.5, 359.5, 0.0};

DepthMap constant_hint(double depth, int rows_from = 0, int rows_to = 720) {
    DepthMap hint(kSize.width, kSize.height);
    for (int r = rows_from; r < rows_to; ++r)
        for (int c = 200; c < 1100; c += 100) hint.set(r, c, depth);
    return hint;
}

Lane2D vertical_label(double u, double v0, double v1) {
    return Lane2D{"l", {{u, v0}, {u, v1}}};
}

}  // namespace

TEST_CASE("project_ground_to_image sends the optical axis to the principal point") {
    LidarSweep sweep;
    sweep.points.push_back({0.0, 0.0, 10.0, 3});
    const auto projected =
        project_ground_to_image(sweep, all_indices(sweep), RigidTransform::identity(), kCam, kSize);
    REQUIRE(projected.size() == 1);
    CHECK(projected[0].u == Approx(639.5).margin(1e-9));
    CHECK(projected[0].v == Approx(359.5).margin(1e-9));
    CHECK(projected[0].beam_id == 3);
    CHECK(projected[0].source_index == 0);
}

TEST_CASE("project_ground_to_image drops points behind the camera and outside the image") {
    LidarSweep sweep;
    sweep.points.push_back({0.0, 0.0, -5.0, 0});   // behind
    sweep.points.push_back({50.0, 0.0, 10.0, 0});  // far off-image
    sweep.points.push_back({0.5, 0.5, 10.0, 1});   // visible
    const auto projected =
        project_ground_to_image(sweep, all_indices(sweep), RigidTransform::identity(), kCam, kSize);
    REQUIRE(projected.size() == 1);
    CHECK(projected[0].source_index == 2);
    CHECK(projected[0].camera.z == Approx(10.0));
}

TEST_CASE("projected ground pixels of a flat scene stay below the horizon row") {
    TerrainModel flat;
    flat.base_height = 1.6;
    RigidTransform extr;
    extr.translation = Eigen::Vector3d(0.0, -0.35, -0.2);
    const LidarSweep sweep = simulate_lidar(flat, extr, 64, 0.5);
    const auto ground = segment_ground(sweep);
    const auto projected = project_ground_to_image(sweep, ground, extr, kCam, kSize);
    REQUIRE(projected.size() > 500);
    std::size_t below = 0;
    for (const ProjectedPoint& p : projected)
        if (p.v > kCam.cy) ++below;
    CHECK(static_cast<double>(below) >= 0.99 * static_cast<double>(projected.size()));
}

TEST_CASE("blend_lane_regions widens by the pinhole width at the row depth") {
    // base 0.4 m at 10 m with fx = 1000 -> 40 px full width, 20 px half.
    const auto hint10 = constant_hint(10.0);
    const auto region10 =
        blend_lane_regions(std::vector<Lane2D>{vertical_label(500, 100, 700)}, kSize, 0.4, kCam, hint10);
    for (int r = 150; r < 650; r += 50) CHECK(region10.halfwidth_px[r] == Approx(20.0).margin(1e-9));
    CHECK(region10.foreground(400, 481));
    CHECK(region10.foreground(400, 519));
    CHECK_FALSE(region10.foreground(400, 521));
    CHECK_FALSE(region10.foreground(400, 479));

    const auto hint40 = constant_hint(40.0);
    const auto region40 =
        blend_lane_regions(std::vector<Lane2D>{vertical_label(500, 100, 700)}, kSize, 0.4, kCam, hint40);
    for (int r = 150; r < 650; r += 50) CHECK(region40.halfwidth_px[r] == Approx(5.0).margin(1e-9));
}

TEST_CASE("blend_lane_regions rejects an empty label list") {
    const auto hint = constant_hint(10.0);
    CHECK_THROWS_AS(blend_lane_regions(std::vector<Lane2D>{}, kSize, 0.4, kCam, hint), EmptyLabels);
}

TEST_CASE("blend half-width clamps to [1 px, W/8] and never widens toward the horizon") {
    DepthMap hint(kSize.width, kSize.height);
    for (int r = 360; r < 700; ++r) hint.set(r, 600, 1.6 * kCam.fy / (r - kCam.cy + 0.5));
    for (int r = 700; r < 720; ++r) hint.set(r, 600, 0.8);  // very shallow returns near the hood
    const auto region =
        blend_lane_regions(std::vector<Lane2D>{vertical_label(500, 0, 719)}, kSize, 0.4, kCam, hint);
    for (int r = 0; r < kSize.height; ++r) {
        CHECK(region.halfwidth_px[r] >= 1.0);
        CHECK(region.halfwidth_px[r] <= kSize.width / 8.0);
        if (r > 0) CHECK(region.halfwidth_px[r - 1] <= region.halfwidth_px[r] + 1e-12);
    }
    // Near range (bottom rows, shallow depth) hits the W/8 cap.
    CHECK(region.halfwidth_px[719] == Approx(kSize.width / 8.0));
    // Far rows shrink to a few pixels but never below 1.
    CHECK(region.halfwidth_px[365] < 3.0);
}

TEST_CASE("recover_lane_points takes the per-beam centroid") {
    LaneRegionMask region(kSize);
    for (int r = 0; r < kSize.height; ++r)
        for (int c = 0; c < kSize.width; ++c) region.label.at(r, c) = 0;
    std::vector<ProjectedPoint> projected;
    projected.push_back({400.0, 500.0, {0.9, 1.6, 10.0}, 4, 0});
    projected.push_back({405.0, 500.0, {1.1, 1.6, 10.0}, 4, 1});
    projected.push_back({402.0, 480.0, {1.0, 1.55, 12.0}, 5, 2});
    projected.push_back({404.0, 481.0, {1.2, 1.55, 12.0}, 5, 3});
    const auto lanes = recover_lane_points(region, projected);
    REQUIRE(lanes.size() == 1);
    REQUIRE(lanes[0].points.size() == 2);
    CHECK(lanes[0].points[0].x == Approx(1.0).margin(1e-12));
    CHECK(lanes[0].points[0].y == Approx(1.6).margin(1e-12));
    CHECK(lanes[0].points[0].z == Approx(10.0).margin(1e-12));
    CHECK(lanes[0].points[1].x == Approx(1.1).margin(1e-12));
}

TEST_CASE("recover_lane_points drops lanes with a single beam") {
    LaneRegionMask region(kSize);
    for (int c = 0; c < kSize.width; ++c) region.label.at(500, c) = 0;
    std::vector<ProjectedPoint> projected;
    projected.push_back({400.0, 500.0, {0.9, 1.6, 10.0}, 4, 0});
    projected.push_back({410.0, 500.0, {1.1, 1.6, 10.0}, 4, 1});
    CHECK(recover_lane_points(region, projected).empty());
}

TEST_CASE("recover_lane_points with nothing in a region returns an empty list") {
    LaneRegionMask region(kSize);
    std::vector<ProjectedPoint> projected;
    projected.push_back({400.0, 500.0, {0.9, 1.6, 10.0}, 4, 0});
    CHECK(recover_lane_points(region, projected).empty());
}

TEST_CASE("annotation pipeline recovers synthetic lanes to centimeter accuracy") {
    MatchConfig cfg;
    double cd_sum = 0.0;
    std::size_t matched = 0, total_gt = 0;
    for (std::uint64_t i = 0; i < 6; ++i) {
        const SyntheticScene scene = make_scene(1000 + i, scene_params_for_index(i));
        const auto recovered = annotate_frame(scene.sweep, scene.labels2d, scene.lidar_extrinsics,
                                              scene.intrinsics, {1280, 720});
        total_gt += scene.lanes.size();
        const FrameMatchResult match = match_frame(recovered, scene.lanes, cfg);
        matched += match.matches.size();
        for (const LaneMatch& m : match.matches)
            cd_sum += unilateral_cd(scene.lanes[m.gt_index], recovered[m.pred_index], cfg);
    }
    REQUIRE(total_gt > 0);
    CHECK(matched == total_gt);
    CHECK(cd_sum / static_cast<double>(matched) < 0.05);
}

TEST_CASE("re-running recovery on re-projected centers is idempotent") {
    const SyntheticScene scene = make_scene(2024, scene_params_for_index(0));
    const auto ground = segment_ground(scene.sweep);
    const auto projected =
        project_ground_to_image(scene.sweep, ground, scene.lidar_extrinsics, scene.intrinsics, {1280, 720});
    const DepthMap hint = make_depth_hint(projected, {1280, 720});
    const auto region = blend_lane_regions(scene.labels2d, {1280, 720}, 0.4, scene.intrinsics, hint);
    const auto lanes = recover_lane_points(region, projected);
    REQUIRE(!lanes.empty());

    std::vector<ProjectedPoint> reprojected;
    for (const Lane3D& lane : lanes) {
        for (std::size_t j = 0; j < lane.points.size(); ++j) {
            const Pixel px = project(lane.points[j], scene.intrinsics);
            reprojected.push_back({px.u, px.v, lane.points[j], static_cast<std::uint16_t>(j), 0});
        }
    }
    const auto again = recover_lane_points(region, reprojected);
    REQUIRE(again.size() == lanes.size());
    for (std::size_t i = 0; i < lanes.size(); ++i) {
        REQUIRE(again[i].points.size() == lanes[i].points.size());
        for (std::size_t j = 0; j < lanes[i].points.size(); ++j)
            CHECK(distance(again[i].points[j], lanes[i].points[j]) < 1e-6);
    }
}

TEST_CASE("interpolated annotation output stays on the recovered polyline course") {
    const SyntheticScene scene = make_scene(77, scene_params_for_index(1));
    AnnotateConfig cfg;
    cfg.interpolate_step = 0.25;
    const auto lanes = annotate_frame(scene.sweep, scene.labels2d, scene.lidar_extrinsics,
                                      scene.intrinsics, {1280, 720}, cfg);
    REQUIRE(!lanes.empty());
    for (const Lane3D& lane : lanes) {
        REQUIRE(lane.points.size() >= 2);
        const auto cum = cumulative_arc_length(lane.points);
        for (std::size_t i = 1; i < cum.size(); ++i) CHECK(cum[i] > cum[i - 1]);
    }
}
