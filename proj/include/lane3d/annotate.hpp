#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "lane3d/camera.hpp"
#include "lane3d/ground.hpp"
#include "lane3d/raster.hpp"
#include "lane3d/spline.hpp"
#include "lane3d/sweep.hpp"
#include "lane3d/types.hpp"

namespace lane3d {

/// A ground LiDAR point projected into the image, keeping the link back to
/// its 3D source (camera frame) and originating beam.
struct ProjectedPoint {
    double u = 0.0;
    double v = 0.0;
    Point3 camera;  // camera-frame position, z > 0
    std::uint16_t beam_id = 0;
    std::uint32_t source_index = 0;  // index into the originating sweep
};

/// Project selected sweep points through the LiDAR-to-camera extrinsics and
/// intrinsics; keep only in-bounds pixels with positive camera depth.
inline std::vector<ProjectedPoint> project_ground_to_image(const LidarSweep& sweep,
                                                           std::span<const std::uint32_t> selection,
                                                           const RigidTransform& extrinsics,
                                                           const CameraIntrinsics& k, ImageSize size) {
    extrinsics.validate();
    k.validate();
    if (size.width <= 0 || size.height <= 0) throw InvalidParams("image size must be positive");
    std::vector<ProjectedPoint> out;
    out.reserve(selection.size());
    for (std::uint32_t idx : selection) {
        const LidarPoint& lp = sweep.points[idx];
        const Point3 cam = extrinsics.apply(lp.position());
        if (cam.z <= 0.0) continue;
        const Pixel px = project(cam, k);
        if (px.u < 0.0 || px.u >= size.width || px.v < 0.0 || px.v >= size.height) continue;
        out.push_back({px.u, px.v, cam, lp.beam_id, idx});
    }
    return out;
}

/// All indices 0..n-1, for projecting a whole sweep.
inline std::vector<std::uint32_t> all_indices(const LidarSweep& sweep) {
    std::vector<std::uint32_t> idx(sweep.size());
    for (std::uint32_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return idx;
}

/// Sparse depth map from projected ground points (nearest depth wins when
/// several points share a pixel).
inline DepthMap make_depth_hint(std::span<const ProjectedPoint> projected, ImageSize size) {
    DepthMap hint(size.width, size.height);
    for (const ProjectedPoint& p : projected) {
        const int col = static_cast<int>(std::lround(p.u));
        const int row = static_cast<int>(std::lround(p.v));
        if (!hint.values.contains(row, col)) continue;
        if (!hint.is_valid(row, col) || p.camera.z < hint.at(row, col)) hint.set(row, col, p.camera.z);
    }
    return hint;
}

/// Per-lane broadened label regions. The label grid holds the lane index
/// (-1 = background); `foreground` reads it as the union mask.
struct LaneRegionMask {
    Grid<std::int16_t> label;
    std::vector<double> halfwidth_px;  // per image row
    ImageSize size;

    LaneRegionMask() = default;
    LaneRegionMask(ImageSize s) : label(s.width, s.height, -1), halfwidth_px(s.height, 0.0), size(s) {}

    bool foreground(int row, int col) const { return label.at(row, col) >= 0; }
    int lane_at(int row, int col) const { return label.at(row, col); }
};

/// Broaden 2D lane labels into regions with a depth-adaptive width: at image
/// row v the blended strip is base_width_m * fx / depth(v) pixels across
/// (half that either side of the label), the half-width clamped to
/// [1, W/8]. depth(v) is the per-row median of the depth hint; rows without
/// depth are filled by linear interpolation and the profile is forced
/// non-increasing toward the horizon.
inline LaneRegionMask blend_lane_regions(std::span<const Lane2D> labels, ImageSize size,
                                         double base_width_m, const CameraIntrinsics& k,
                                         const DepthMap& depth_hint) {
    if (labels.empty()) throw EmptyLabels();
    if (!(base_width_m > 0.0)) throw InvalidParams("base_width_m must be > 0");
    k.validate();
    if (!depth_hint.values.same_shape(size.width, size.height))
        throw ShapeMismatch("depth hint does not match the image size");

    // Per-row median depth over valid hint pixels.
    const int h = size.height, w = size.width;
    std::vector<double> row_depth(h, 0.0);
    std::vector<char> row_has(h, 0);
    std::vector<double> scratch;
    for (int r = 0; r < h; ++r) {
        scratch.clear();
        for (int c = 0; c < w; ++c)
            if (depth_hint.is_valid(r, c)) scratch.push_back(depth_hint.at(r, c));
        if (scratch.empty()) continue;
        std::nth_element(scratch.begin(), scratch.begin() + scratch.size() / 2, scratch.end());
        row_depth[r] = scratch[scratch.size() / 2];
        row_has[r] = 1;
    }
    // Fill gaps by linear interpolation between known rows, clamping the ends.
    int first = -1, last = -1;
    for (int r = 0; r < h; ++r)
        if (row_has[r]) {
            if (first < 0) first = r;
            last = r;
        }
    if (first < 0) throw InsufficientData("depth hint has no valid pixels");
    for (int r = 0; r < first; ++r) row_depth[r] = row_depth[first];
    for (int r = last + 1; r < h; ++r) row_depth[r] = row_depth[last];
    for (int r = first; r <= last; ++r) {
        if (row_has[r]) continue;
        int next = r + 1;
        while (!row_has[next]) ++next;
        const int prev = r - 1;  // always known or already filled
        const double t = 1.0 / static_cast<double>(next - prev);
        row_depth[r] = row_depth[prev] + (row_depth[next] - row_depth[prev]) * t;
        row_has[r] = 1;
    }

    LaneRegionMask region(size);
    const double max_hw = static_cast<double>(w) / 8.0;
    for (int r = 0; r < h; ++r)
        region.halfwidth_px[r] =
            std::clamp(0.5 * base_width_m * k.fx / std::max(row_depth[r], 1e-6), 1.0, max_hw);
    // Rows farther up the image may never widen: enforce monotonicity walking
    // from the bottom row toward the horizon.
    for (int r = h - 2; r >= 0; --r)
        region.halfwidth_px[r] = std::min(region.halfwidth_px[r], region.halfwidth_px[r + 1]);

    // Stamp each polyline with its per-row horizontal span. First lane wins
    // where regions overlap.
    for (std::size_t li = 0; li < labels.size(); ++li) {
        const Lane2D& lane = labels[li];
        for (std::size_t i = 0; i + 1 < lane.points.size(); ++i) {
            const Pixel a = lane.points[i];
            const Pixel b = lane.points[i + 1];
            const double span = std::max(std::abs(b.u - a.u), std::abs(b.v - a.v));
            const int steps = std::max(1, static_cast<int>(std::ceil(span / 0.5)));
            for (int s = 0; s <= steps; ++s) {
                const double t = static_cast<double>(s) / steps;
                const double u = a.u + (b.u - a.u) * t;
                const double v = a.v + (b.v - a.v) * t;
                const int row = static_cast<int>(std::lround(v));
                if (row < 0 || row >= h) continue;
                const double hw = region.halfwidth_px[row];
                const int c0 = std::max(0, static_cast<int>(std::ceil(u - hw)));
                const int c1 = std::min(w - 1, static_cast<int>(std::floor(u + hw)));
                for (int c = c0; c <= c1; ++c)
                    if (region.label.at(row, c) < 0) region.label.at(row, c) = static_cast<std::int16_t>(li);
            }
        }
    }
    return region;
}

/// Cluster projected ground points per (lane region, beam) into centroid lane
/// points; order each lane's centers by beam (near ring first) and drop lanes
/// with fewer than two centers.
inline std::vector<Lane3D> recover_lane_points(const LaneRegionMask& region,
                                               std::span<const ProjectedPoint> projected) {
    struct Accum {
        Point3 sum{0, 0, 0};
        std::size_t count = 0;
    };
    std::map<std::pair<int, int>, Accum> clusters;  // (lane, beam) -> accumulator
    for (const ProjectedPoint& p : projected) {
        const int row = std::clamp(static_cast<int>(std::lround(p.v)), 0, region.size.height - 1);
        const int col = std::clamp(static_cast<int>(std::lround(p.u)), 0, region.size.width - 1);
        const int lane = region.lane_at(row, col);
        if (lane < 0) continue;
        Accum& acc = clusters[{lane, p.beam_id}];
        acc.sum = acc.sum + p.camera;
        acc.count += 1;
    }

    std::vector<Lane3D> lanes;
    int current_lane = -1;
    for (const auto& [key, acc] : clusters) {
        const Point3 center = acc.sum * (1.0 / static_cast<double>(acc.count));
        if (key.first != current_lane) {
            current_lane = key.first;
            lanes.push_back(Lane3D{"lane_" + std::to_string(current_lane), {}});
        }
        if (!lanes.back().points.empty() && distance(lanes.back().points.back(), center) == 0.0) continue;
        lanes.back().points.push_back(center);
    }
    std::erase_if(lanes, [](const Lane3D& l) { return l.points.size() < 2; });
    return lanes;
}

/// The full annotation pipeline for one frame: ground segmentation,
/// projection, adaptive blending (depth hint built from the projected ground
/// points themselves), and per-beam recovery. Optionally densify the output
/// with the spline used for training labels.
struct AnnotateConfig {
    GroundSegConfig ground;
    double base_width_m = 0.4;
    double interpolate_step = 0.0;  // > 0: spline-resample recovered lanes
};

inline std::vector<Lane3D> annotate_frame(const LidarSweep& sweep, std::span<const Lane2D> labels2d,
                                          const RigidTransform& extrinsics, const CameraIntrinsics& k,
                                          ImageSize size, const AnnotateConfig& cfg = {}) {
    const std::vector<std::uint32_t> ground = segment_ground(sweep, cfg.ground);
    const std::vector<ProjectedPoint> projected = project_ground_to_image(sweep, ground, extrinsics, k, size);
    const DepthMap hint = make_depth_hint(projected, size);
    const LaneRegionMask region = blend_lane_regions(labels2d, size, cfg.base_width_m, k, hint);
    std::vector<Lane3D> lanes = recover_lane_points(region, projected);
    if (cfg.interpolate_step > 0.0)
        for (Lane3D& lane : lanes) lane = interpolate_lane(lane, cfg.interpolate_step);
    return lanes;
}

}  // namespace lane3d
