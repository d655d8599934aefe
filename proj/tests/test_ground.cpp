#include <catch2/catch.hpp>

#include <algorithm>
#include <set>

#include "lane3d/ground.hpp"
#include "lane3d/synthetic.hpp"

using namespace lane3d;

namespace {

RigidTransform default_extr() {
    RigidTransform t;
    t.translation = Eigen::Vector3d(0.0, -0.35, -0.2);
    return t;
}

/// Flat scene whose rings all stay within growth connectivity.
LidarSweep flat_sweep() {
    TerrainModel flat;
    flat.base_height = 1.6;
    LidarParams params;
    params.elevation_min_deg = -25.0;
    params.elevation_max_deg = -5.0;
    return simulate_lidar(flat, default_extr(), 48, 0.5, params);
}

}  // namespace

TEST_CASE("segment_ground keeps every point of an unobstructed plane") {
    const LidarSweep sweep = flat_sweep();
    REQUIRE(sweep.size() > 1000);
    const auto ground = segment_ground(sweep);
    CHECK(ground.size() == sweep.size());
}

TEST_CASE("segment_ground output is a subset of the input by identity") {
    const LidarSweep sweep = flat_sweep();
    const auto ground = segment_ground(sweep);
    std::set<std::uint32_t> unique(ground.begin(), ground.end());
    CHECK(unique.size() == ground.size());
    for (std::uint32_t idx : ground) CHECK(idx < sweep.size());
}

TEST_CASE("segment_ground excludes vertical wall points") {
    LidarSweep sweep = flat_sweep();
    const std::uint32_t n_ground = static_cast<std::uint32_t>(sweep.size());
    // Vertical wall across the road at z = 15 (lidar frame), 3 m tall.
    for (double x = -6.0; x <= 6.0; x += 0.1)
        for (double y = -1.0; y <= 1.9; y += 0.1)
            sweep.points.push_back({x, y, 15.0, 2});

    const auto ground = segment_ground(sweep);
    CHECK(!ground.empty());
    for (std::uint32_t idx : ground) CHECK(idx < n_ground);
    // The flood still has to reach ground beyond the wall.
    double max_z = 0.0;
    for (std::uint32_t idx : ground) max_z = std::max(max_z, sweep.points[idx].z);
    CHECK(max_z > 17.0);
}

TEST_CASE("segment_ground rejects an empty sweep") {
    CHECK_THROWS_AS(segment_ground(LidarSweep{}), NoGroundFound);
}

TEST_CASE("segment_ground reports NoGroundFound when the coarse band is empty") {
    LidarSweep sweep;
    for (double x = -2.0; x <= 2.0; x += 0.5) sweep.points.push_back({x, 1.9, 10.0, 0});
    GroundSegConfig cfg;
    cfg.height_min = 50.0;
    cfg.height_max = 60.0;
    CHECK_THROWS_AS(segment_ground(sweep, cfg), NoGroundFound);
}

TEST_CASE("segment_ground reports NoGroundFound when no seed survives") {
    // All points far beyond the seed window.
    TerrainModel flat;
    LidarParams params;
    params.elevation_min_deg = -4.0;
    params.elevation_max_deg = -2.0;  // rings land beyond z = 25
    const LidarSweep sweep = simulate_lidar(flat, default_extr(), 8, 0.5, params);
    REQUIRE(!sweep.empty());
    CHECK_THROWS_AS(segment_ground(sweep), NoGroundFound);
}

TEST_CASE("segment_ground result does not depend on the seed draw") {
    const LidarSweep sweep = flat_sweep();
    GroundSegConfig a, b;
    a.rng_seed = 1;
    b.rng_seed = 999;
    CHECK(segment_ground(sweep, a) == segment_ground(sweep, b));
}

TEST_CASE("segment_ground works on hilly terrain scenes") {
    const TerrainModel terrain = generate_terrain(71, TerrainParams{});
    LidarParams params;
    params.elevation_min_deg = -25.0;
    params.elevation_max_deg = -4.0;
    const LidarSweep sweep = simulate_lidar(terrain, default_extr(), 64, 0.4, params);
    const auto ground = segment_ground(sweep);
    // Gentle hills stay within normal tolerance: nearly everything is ground.
    CHECK(ground.size() > sweep.size() * 9 / 10);
}

TEST_CASE("ground config validation") {
    GroundSegConfig cfg;
    cfg.seed_count = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidParams);
    cfg = GroundSegConfig{};
    cfg.growth_normal_tol_deg = 95.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidParams);
    cfg = GroundSegConfig{};
    cfg.height_min = 2.0;
    cfg.height_max = 1.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidParams);
}
