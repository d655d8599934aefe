#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lane3d/camera.hpp"
#include "lane3d/raster.hpp"
#include "lane3d/rng.hpp"
#include "lane3d/sweep.hpp"
#include "lane3d/types.hpp"

namespace lane3d {

// ---------------------------------------------------------------------------
// Terrain
// ---------------------------------------------------------------------------

struct GaussianBump {
    double center_x = 0.0;
    double center_z = 0.0;
    double sigma = 1.0;
    double amplitude = 0.0;  // meters, added to the down-positive ground height
};

/// Gaussian-mixture ground surface plus an optional linear ramp. The height
/// field is expressed directly in camera-frame y (down-positive): the ground
/// at (x, z) sits at y = base_height + slope_z * z + sum of bumps, so
/// base_height is also the camera height above the local ground at the
/// origin. A hill that rises toward the camera therefore carries a negative
/// amplitude.
struct TerrainModel {
    std::vector<GaussianBump> gaussians;
    double base_height = 1.6;
    double slope_z = 0.0;

    double height(double x, double z) const {
        double h = base_height + slope_z * z;
        for (const GaussianBump& g : gaussians) {
            const double dx = x - g.center_x;
            const double dz = z - g.center_z;
            h += g.amplitude * std::exp(-(dx * dx + dz * dz) / (2.0 * g.sigma * g.sigma));
        }
        return h;
    }

    void validate() const {
        if (!std::isfinite(base_height) || !std::isfinite(slope_z)) throw InvalidParams("terrain parameters must be finite");
        for (const GaussianBump& g : gaussians)
            if (!(g.sigma > 0.0) || !std::isfinite(g.amplitude) || !std::isfinite(g.center_x) || !std::isfinite(g.center_z))
                throw InvalidParams("gaussian bump needs sigma > 0 and finite parameters");
    }
};

enum class TerrainKind { Flat, Ramp, Hills };

struct TerrainParams {
    TerrainKind kind = TerrainKind::Hills;
    double base_height = 1.6;
    int min_gaussians = 1;
    int max_gaussians = 3;
    double amplitude_max = 0.4;  // |amplitude| upper bound, meters
    double sigma_min = 15.0;
    double sigma_max = 30.0;
    double slope_max = 0.02;  // |dy/dz| for ramp terrains
    double center_x_max = 10.0;
    double center_z_min = 10.0;
    double center_z_max = 35.0;
};

inline TerrainModel generate_terrain(std::uint64_t seed, const TerrainParams& params = {}) {
    Rng rng(seed);
    TerrainModel terrain;
    terrain.base_height = params.base_height;
    switch (params.kind) {
        case TerrainKind::Flat:
            break;
        case TerrainKind::Ramp: {
            const double magnitude = rng.uniform(0.25 * params.slope_max, params.slope_max);
            terrain.slope_z = rng.uniform() < 0.5 ? -magnitude : magnitude;
            break;
        }
        case TerrainKind::Hills: {
            const int n = params.min_gaussians +
                          static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(
                              params.max_gaussians - params.min_gaussians + 1)));
            for (int i = 0; i < n; ++i) {
                GaussianBump g;
                g.center_x = rng.uniform(-params.center_x_max, params.center_x_max);
                g.center_z = rng.uniform(params.center_z_min, params.center_z_max);
                g.sigma = rng.uniform(params.sigma_min, params.sigma_max);
                g.amplitude = rng.uniform(-params.amplitude_max, params.amplitude_max);
                terrain.gaussians.push_back(g);
            }
            break;
        }
    }
    return terrain;
}

// ---------------------------------------------------------------------------
// Lanes
// ---------------------------------------------------------------------------

/// Top-view lane shape x(z) = a0 + a1 z + a2 z^2 + a3 z^3 + a4 z^4, lifted
/// onto the terrain.
struct LaneLayoutParams {
    double z_start = 9.0;
    double z_end = 20.0;
    double point_spacing = 1.0;   // meters along z between stored points
    double lane_spacing = 3.2;    // lateral spacing between adjacent lanes
    double center_max = 1.2;      // random lateral shift of the whole bundle
    double heading_max = 0.03;    // |a1|
    double curvature_max = 5e-4;  // |a2|
    double cubic_max = 3e-6;      // |a3|
    double quartic_max = 3e-8;    // |a4|
    double z_jitter = 0.0;        // optional jitter on z_start / z_end
};

inline std::vector<Lane3D> lay_lanes(const TerrainModel& terrain, int n_lanes,
                                     const LaneLayoutParams& params, std::uint64_t seed) {
    if (n_lanes < 1) throw InvalidParams("n_lanes must be >= 1");
    Rng rng(seed);
    const double center = rng.uniform(-params.center_max, params.center_max);
    const double a1 = rng.uniform(-params.heading_max, params.heading_max);
    const double a2 = rng.uniform(-params.curvature_max, params.curvature_max);
    const double a3 = rng.uniform(-params.cubic_max, params.cubic_max);
    const double a4 = rng.uniform(-params.quartic_max, params.quartic_max);
    const double z0 = params.z_start + (params.z_jitter > 0.0 ? rng.uniform(0.0, params.z_jitter) : 0.0);
    const double z1 = params.z_end - (params.z_jitter > 0.0 ? rng.uniform(0.0, params.z_jitter) : 0.0);

    std::vector<Lane3D> lanes;
    lanes.reserve(static_cast<std::size_t>(n_lanes));
    for (int k = 0; k < n_lanes; ++k) {
        Lane3D lane;
        lane.lane_id = "lane_" + std::to_string(k);
        const double a0 = center + (k - (n_lanes - 1) * 0.5) * params.lane_spacing;
        for (double z = z0; z <= z1 + 1e-9; z += params.point_spacing) {
            const double x = a0 + ((((a4 * z) + a3) * z + a2) * z + a1) * z;
            lane.points.push_back({x, terrain.height(x, z), z});
        }
        if (lane.points.size() >= 2) lanes.push_back(std::move(lane));
    }
    return lanes;
}

// ---------------------------------------------------------------------------
// LiDAR simulation
// ---------------------------------------------------------------------------

struct LidarParams {
    double elevation_min_deg = -25.0;
    double elevation_max_deg = 3.0;
    double azimuth_min_deg = -60.0;
    double azimuth_max_deg = 60.0;
    double max_range = 200.0;
    double march_step = 0.5;   // coarse marching before bisection
    double bisect_tol = 1e-4;  // meters
};

/// Cast one ray (camera-frame origin/direction) against the terrain surface.
/// Returns the hit parameter, or a negative value when the ray misses within
/// max_range.
inline double raycast_terrain(const TerrainModel& terrain, const Point3& origin, const Point3& dir,
                              const LidarParams& params) {
    auto above = [&](double t) {
        const double x = origin.x + t * dir.x;
        const double y = origin.y + t * dir.y;
        const double z = origin.z + t * dir.z;
        return terrain.height(x, z) - y;  // positive while the point is above the ground
    };
    double t_prev = 0.0;
    if (above(0.0) <= 0.0) return -1.0;  // sensor at or below the surface
    for (double t = params.march_step; t <= params.max_range; t += params.march_step) {
        if (above(t) <= 0.0) {
            double lo = t_prev, hi = t;
            while (hi - lo > params.bisect_tol) {
                const double mid = 0.5 * (lo + hi);
                if (above(mid) > 0.0)
                    lo = mid;
                else
                    hi = mid;
            }
            return 0.5 * (lo + hi);
        }
        t_prev = t;
    }
    return -1.0;
}

/// Simulate a spinning-LiDAR sweep: beam_count elevation rings, a forward
/// azimuth sector, rays intersected with the terrain by marching plus
/// bisection. Points are reported in the LiDAR frame with their beam index
/// (beam 0 = lowest elevation).
inline LidarSweep simulate_lidar(const TerrainModel& terrain, const RigidTransform& extrinsics,
                                 int beam_count, double azimuth_step_deg,
                                 const LidarParams& params = {}) {
    if (beam_count < 1) throw InvalidParams("beam_count must be >= 1");
    if (!(azimuth_step_deg > 0.0)) throw InvalidParams("azimuth step must be > 0");
    terrain.validate();
    extrinsics.validate();
    const RigidTransform to_lidar = extrinsics.inverse();
    const Point3 origin{extrinsics.translation.x(), extrinsics.translation.y(), extrinsics.translation.z()};

    LidarSweep sweep;
    const int azimuth_count =
        static_cast<int>(std::floor((params.azimuth_max_deg - params.azimuth_min_deg) / azimuth_step_deg)) + 1;
    for (int b = 0; b < beam_count; ++b) {
        const double elev_deg =
            beam_count == 1 ? params.elevation_min_deg
                            : params.elevation_min_deg + (params.elevation_max_deg - params.elevation_min_deg) *
                                                             static_cast<double>(b) / (beam_count - 1);
        const double elev = elev_deg * M_PI / 180.0;
        for (int a = 0; a < azimuth_count; ++a) {
            const double az = (params.azimuth_min_deg + a * azimuth_step_deg) * M_PI / 180.0;
            const Point3 dir_lidar{std::cos(elev) * std::sin(az), -std::sin(elev), std::cos(elev) * std::cos(az)};
            const Eigen::Vector3d d = extrinsics.rotation * Eigen::Vector3d(dir_lidar.x, dir_lidar.y, dir_lidar.z);
            const Point3 dir{d.x(), d.y(), d.z()};
            const double t = raycast_terrain(terrain, origin, dir, params);
            if (t < 0.0) continue;
            const Point3 hit_cam = origin + dir * t;
            const Point3 hit = to_lidar.apply(hit_cam);
            sweep.points.push_back({hit.x, hit.y, hit.z, static_cast<std::uint16_t>(b)});
        }
    }
    return sweep;
}

// ---------------------------------------------------------------------------
// Frame rendering
// ---------------------------------------------------------------------------

/// Snap to a 2^-24 pixel grid. Label coordinates quantized this way survive
/// mirror arithmetic (W-1-u) without rounding, which keeps flip twice == id
/// bit-exact while staying ~6e-8 px from the true projection.
inline double quantize_px(double v) { return std::ldexp(std::round(std::ldexp(v, 24)), -24); }

struct RenderedFrame {
    std::vector<Lane2D> labels2d;
    DepthMap depth;
    SegmentationMask mask;
};

/// Project lanes into 2D labels, a sparse ground-truth depth map along lane
/// pixels, and the rasterized binary mask. Depth at a lane pixel is the exact
/// z of the lane point that stamped it (first writer wins).
inline RenderedFrame render_frame(const std::vector<Lane3D>& lanes, const CameraIntrinsics& k,
                                  ImageSize size) {
    k.validate();
    if (size.width <= 0 || size.height <= 0) throw InvalidParams("image size must be positive");
    RenderedFrame frame;
    frame.depth = DepthMap(size.width, size.height);
    frame.mask = SegmentationMask(size.width, size.height);

    for (const Lane3D& lane : lanes) {
        lane.validate();
        Lane2D label;
        label.lane_id = lane.lane_id;
        for (const Point3& p : lane.points) {
            const Pixel px = project(p, k);
            label.points.push_back({quantize_px(px.u), quantize_px(px.v)});
        }
        frame.labels2d.push_back(std::move(label));

        for (std::size_t i = 0; i + 1 < lane.points.size(); ++i) {
            const Point3& a = lane.points[i];
            const Point3& b = lane.points[i + 1];
            const Pixel pa = project(a, k);
            const Pixel pb = project(b, k);
            const double span = std::max(std::abs(pb.u - pa.u), std::abs(pb.v - pa.v));
            const int steps = std::max(1, static_cast<int>(std::ceil(span / 0.5)));
            for (int s = 0; s <= steps; ++s) {
                const double t = static_cast<double>(s) / steps;
                const Point3 p = a + (b - a) * t;
                const Pixel px = project(p, k);
                const int col = static_cast<int>(std::lround(px.u));
                const int row = static_cast<int>(std::lround(px.v));
                if (!frame.mask.values.contains(row, col)) continue;
                if (!frame.depth.is_valid(row, col)) {
                    frame.depth.set(row, col, p.z);
                    frame.mask.set(row, col);
                }
            }
        }
    }
    return frame;
}

// ---------------------------------------------------------------------------
// Prediction perturbation
// ---------------------------------------------------------------------------

/// Controlled degradation of a lane set: zero-mean Gaussian noise on every
/// point, whole-lane drops, and injected false lanes. The per-point noise is
/// correlated within a lane (a lane-level placement error plus independent
/// jitter, total marginal sigma = noise_sigma), the way a detector misplaces
/// whole markings rather than individual points. Hallucinations are near-miss
/// parallels of real lanes at lateral offsets up to ~1.2 m, the failure mode
/// a loose chamfer threshold starts accepting. Deterministic in the seed.
inline std::vector<Lane3D> perturb_predictions(const std::vector<Lane3D>& lanes, double noise_sigma,
                                               double drop_rate, double hallucinate_rate,
                                               std::uint64_t seed) {
    if (drop_rate < 0.0 || drop_rate > 1.0 || hallucinate_rate < 0.0 || hallucinate_rate > 1.0)
        throw InvalidParams("rates must lie in [0, 1]");
    if (noise_sigma < 0.0) throw InvalidParams("noise sigma must be >= 0");
    Rng rng(seed);
    const double bias_sigma = 0.7 * noise_sigma;
    const double jitter_sigma = std::sqrt(std::max(0.0, noise_sigma * noise_sigma - bias_sigma * bias_sigma));
    std::vector<Lane3D> out;
    std::vector<std::size_t> dropped;
    for (std::size_t i = 0; i < lanes.size(); ++i) {
        if (rng.uniform() < drop_rate) {
            dropped.push_back(i);
            continue;
        }
        Lane3D noisy = lanes[i];
        const double bx = rng.gaussian(0.0, bias_sigma);
        const double by = rng.gaussian(0.0, bias_sigma);
        const double bz = rng.gaussian(0.0, bias_sigma);
        for (Point3& p : noisy.points) {
            p.x += bx + rng.gaussian(0.0, jitter_sigma);
            p.y += by + rng.gaussian(0.0, jitter_sigma);
            p.z = std::max(0.1, p.z + bz + rng.gaussian(0.0, jitter_sigma));
        }
        out.push_back(std::move(noisy));
    }
    int hallucinated = 0;
    for (std::size_t i = 0; i < lanes.size(); ++i) {
        if (rng.uniform() >= hallucinate_rate) continue;
        // A displaced firing where a lane went undetected, else a double
        // firing next to a detected one.
        const std::size_t base =
            dropped.empty() ? rng.uniform_index(lanes.size()) : dropped[rng.uniform_index(dropped.size())];
        Lane3D fake = lanes[base];
        fake.lane_id = "hallucination_" + std::to_string(hallucinated++);
        const double offset = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.2, 1.2);
        for (Point3& p : fake.points) {
            p.x += offset + rng.gaussian(0.0, jitter_sigma);
            p.y += rng.gaussian(0.0, jitter_sigma);
        }
        out.push_back(std::move(fake));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Whole-scene assembly
// ---------------------------------------------------------------------------

struct SceneParams {
    TerrainParams terrain;
    int min_lanes = 2;
    int max_lanes = 3;
    LaneLayoutParams lanes;
    CameraIntrinsics intrinsics{1000.0, 1000.0, 639.5, 359.5, 0.0};
    ImageSize image_size{1280, 720};
    int beam_count = 64;
    double azimuth_step_deg = 0.2;
    LidarParams lidar;
    RigidTransform lidar_extrinsics = [] {
        RigidTransform t;
        t.translation = Eigen::Vector3d(0.0, -0.35, -0.2);  // sensor above and behind the camera
        return t;
    }();
};

struct SyntheticScene {
    TerrainModel terrain;
    std::vector<Lane3D> lanes;
    CameraIntrinsics intrinsics;
    RigidTransform lidar_extrinsics;
    LidarSweep sweep;
    std::vector<Lane2D> labels2d;
    DepthMap depth;
    SegmentationMask mask;
    std::uint64_t rng_seed = 0;
};

inline SyntheticScene make_scene(std::uint64_t seed, const SceneParams& params = {}) {
    SyntheticScene scene;
    scene.rng_seed = seed;
    scene.terrain = generate_terrain(Rng::derive_seed(seed, 1), params.terrain);
    Rng pick(Rng::derive_seed(seed, 2));
    const int n_lanes =
        params.min_lanes + static_cast<int>(pick.uniform_index(static_cast<std::uint64_t>(
                               params.max_lanes - params.min_lanes + 1)));
    scene.lanes = lay_lanes(scene.terrain, n_lanes, params.lanes, Rng::derive_seed(seed, 3));
    scene.intrinsics = params.intrinsics;
    scene.lidar_extrinsics = params.lidar_extrinsics;
    scene.sweep = simulate_lidar(scene.terrain, scene.lidar_extrinsics, params.beam_count,
                                 params.azimuth_step_deg, params.lidar);
    RenderedFrame rendered = render_frame(scene.lanes, scene.intrinsics, params.image_size);
    scene.labels2d = std::move(rendered.labels2d);
    scene.depth = std::move(rendered.depth);
    scene.mask = std::move(rendered.mask);
    return scene;
}

/// Cycle flat / ramp / hills terrains by scene index.
inline SceneParams scene_params_for_index(std::uint64_t index, SceneParams base = {}) {
    switch (index % 3) {
        case 0: base.terrain.kind = TerrainKind::Flat; break;
        case 1: base.terrain.kind = TerrainKind::Ramp; break;
        default: base.terrain.kind = TerrainKind::Hills; break;
    }
    return base;
}

}  // namespace lane3d
