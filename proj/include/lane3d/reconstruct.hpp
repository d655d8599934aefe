#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <cstdint>
#include <span>
#include <vector>

#include "lane3d/camera.hpp"
#include "lane3d/polyline.hpp"
#include "lane3d/raster.hpp"
#include "lane3d/spline.hpp"
#include "lane3d/types.hpp"

namespace lane3d {

// ---------------------------------------------------------------------------
// Pixel offsets (delta_u, delta_v)
// ---------------------------------------------------------------------------

struct PixelSeed {
    int u = 0;
    int v = 0;
};

struct RefinedPixel {
    double u = 0.0;
    double v = 0.0;
    bool clamped = false;
};

/// Refine integer seed locations with the predicted sub-pixel offsets:
/// (u, v) = (u_s + delta_u, v_s + delta_v). Results falling outside the image
/// are clamped and flagged rather than discarded.
inline std::vector<RefinedPixel> apply_offsets(std::span<const PixelSeed> seeds, const OffsetMaps& offsets) {
    offsets.validate();
    const int w = offsets.width(), h = offsets.height();
    std::vector<RefinedPixel> out;
    out.reserve(seeds.size());
    for (const PixelSeed& s : seeds) {
        if (s.u < 0 || s.u >= w || s.v < 0 || s.v >= h)
            throw OutOfBounds("seed pixel (" + std::to_string(s.u) + ", " + std::to_string(s.v) +
                              ") outside the raster");
        RefinedPixel r;
        r.u = s.u + offsets.delta_u.at(s.v, s.u);
        r.v = s.v + offsets.delta_v.at(s.v, s.u);
        const double cu = std::clamp(r.u, 0.0, static_cast<double>(w - 1));
        const double cv = std::clamp(r.v, 0.0, static_cast<double>(h - 1));
        r.clamped = (cu != r.u) || (cv != r.v);
        r.u = cu;
        r.v = cv;
        out.push_back(r);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Row anchors and residual depth
// ---------------------------------------------------------------------------

/// Per-row depth shift and scale making depth regression residual:
/// z = alpha_r + beta_r * delta_z.
struct RowAnchors {
    std::vector<double> alpha;
    std::vector<double> beta;

    std::size_t rows() const { return alpha.size(); }

    void validate() const {
        if (alpha.size() != beta.size()) throw ShapeMismatch("alpha/beta length mismatch");
        if (alpha.empty()) throw InsufficientData("anchor table is empty");
        for (std::size_t r = 0; r < beta.size(); ++r) {
            if (!(beta[r] > 0.0)) throw InvalidParams("beta must be > 0 at every row");
            if (!std::isfinite(alpha[r]) || !std::isfinite(beta[r]))
                throw InvalidParams("anchors must be finite");
        }
    }
};

/// Decode a residual depth prediction at an image row.
inline double decode_depth(std::size_t row, double delta_z, const RowAnchors& anchors) {
    if (row >= anchors.rows()) throw OutOfBounds("row outside the anchor table");
    const double z = anchors.alpha[row] + anchors.beta[row] * delta_z;
    if (z <= 0.0) throw NonPositiveDepth("decoded depth is not positive");
    return z;
}

/// Inverse of decode_depth, used to build training targets.
inline double encode_depth(std::size_t row, double z, const RowAnchors& anchors) {
    if (row >= anchors.rows()) throw OutOfBounds("row outside the anchor table");
    return (z - anchors.alpha[row]) / anchors.beta[row];
}

/// Streaming fit of per-row anchors from sparse ground-truth depth maps:
/// alpha is the mean of valid depths at the row, beta the standard deviation
/// floored at 0.1 m. Rows without data are filled by linear interpolation
/// from the neighboring fitted rows (ends clamped).
class RowAnchorAccumulator {
public:
    explicit RowAnchorAccumulator(int height = 0)
        : sum_(height, 0.0), sum_sq_(height, 0.0), count_(height, 0) {}

    int height() const { return static_cast<int>(sum_.size()); }

    void add(const DepthMap& map) {
        if (sum_.empty()) {
            sum_.assign(map.height(), 0.0);
            sum_sq_.assign(map.height(), 0.0);
            count_.assign(map.height(), 0);
        }
        if (map.height() != height()) throw ShapeMismatch("depth maps must share height");
        for (int r = 0; r < map.height(); ++r) {
            for (int c = 0; c < map.width(); ++c) {
                if (!map.is_valid(r, c)) continue;
                const double d = map.at(r, c);
                sum_[r] += d;
                sum_sq_[r] += d * d;
                ++count_[r];
            }
        }
    }

    void merge(const RowAnchorAccumulator& other) {
        if (sum_.empty()) {
            *this = other;
            return;
        }
        if (other.sum_.empty()) return;
        if (other.height() != height()) throw ShapeMismatch("depth maps must share height");
        for (int r = 0; r < height(); ++r) {
            sum_[r] += other.sum_[r];
            sum_sq_[r] += other.sum_sq_[r];
            count_[r] += other.count_[r];
        }
    }

    RowAnchors finalize() const {
        constexpr double kBetaFloor = 0.1;
        const int h = height();
        if (h == 0) throw InsufficientData("no depth maps");
        RowAnchors anchors;
        anchors.alpha.assign(h, 0.0);
        anchors.beta.assign(h, kBetaFloor);
        std::vector<char> has(h, 0);
        int rows_with_data = 0;
        for (int r = 0; r < h; ++r) {
            if (count_[r] == 0) continue;
            const double mean = sum_[r] / static_cast<double>(count_[r]);
            const double var = std::max(0.0, sum_sq_[r] / static_cast<double>(count_[r]) - mean * mean);
            anchors.alpha[r] = mean;
            anchors.beta[r] = std::max(std::sqrt(var), kBetaFloor);
            has[r] = 1;
            ++rows_with_data;
        }
        if (rows_with_data < 2) throw InsufficientData("fewer than 2 rows carry any valid depth");

        int first = -1, last = -1;
        for (int r = 0; r < h; ++r)
            if (has[r]) {
                if (first < 0) first = r;
                last = r;
            }
        for (int r = 0; r < first; ++r) {
            anchors.alpha[r] = anchors.alpha[first];
            anchors.beta[r] = anchors.beta[first];
        }
        for (int r = last + 1; r < h; ++r) {
            anchors.alpha[r] = anchors.alpha[last];
            anchors.beta[r] = anchors.beta[last];
        }
        for (int r = first; r <= last; ++r) {
            if (has[r]) continue;
            int next = r + 1;
            while (!has[next]) ++next;
            const double t = 1.0 / static_cast<double>(next - (r - 1));
            anchors.alpha[r] = anchors.alpha[r - 1] + (anchors.alpha[next] - anchors.alpha[r - 1]) * t;
            anchors.beta[r] = anchors.beta[r - 1] + (anchors.beta[next] - anchors.beta[r - 1]) * t;
            has[r] = 1;
        }
        return anchors;
    }

private:
    std::vector<double> sum_, sum_sq_;
    std::vector<std::size_t> count_;
};

inline RowAnchors fit_row_anchors(std::span<const DepthMap> depth_maps) {
    if (depth_maps.empty()) throw InsufficientData("no depth maps");
    RowAnchorAccumulator acc(depth_maps.front().height());
    for (const DepthMap& m : depth_maps) acc.add(m);
    return acc.finalize();
}

// ---------------------------------------------------------------------------
// Depth completion
// ---------------------------------------------------------------------------

/// Densify a sparse depth map. Valid input pixels pass through untouched;
/// missing pixels copy the nearest valid value in their row, and rows with no
/// data copy the nearest filled row per column. Copying (rather than e.g. a
/// max-dilation) keeps every filled value inside the input range and keeps
/// the vertical depth gradient near the horizon from leaking across rows.
inline DepthMap complete_depth(const DepthMap& sparse) {
    const int h = sparse.height(), w = sparse.width();
    if (sparse.valid_count() == 0) throw EmptyDepth();
    DepthMap dense = sparse;

    std::vector<char> row_has(h, 0);
    for (int r = 0; r < h; ++r) {
        int prev = -1;
        for (int c = 0; c < w; ++c)
            if (sparse.is_valid(r, c)) {
                row_has[r] = 1;
                // Fill the run before this valid pixel: nearest wins, left on ties.
                for (int g = prev + 1; g < c; ++g) {
                    if (prev < 0)
                        dense.set(r, g, sparse.at(r, c));
                    else
                        dense.set(r, g, (g - prev) <= (c - g) ? sparse.at(r, prev) : sparse.at(r, c));
                }
                prev = c;
            }
        if (prev >= 0)
            for (int g = prev + 1; g < w; ++g) dense.set(r, g, sparse.at(r, prev));
    }

    // Columns of empty rows: copy from the nearest filled row (upper on ties).
    int first = -1, last = -1;
    for (int r = 0; r < h; ++r)
        if (row_has[r]) {
            if (first < 0) first = r;
            last = r;
        }
    for (int r = 0; r < h; ++r) {
        if (row_has[r]) continue;
        int src;
        if (r < first) {
            src = first;
        } else if (r > last) {
            src = last;
        } else {
            int up = r - 1;
            while (!row_has[up]) --up;
            int down = r + 1;
            while (!row_has[down]) ++down;
            src = (r - up) <= (down - r) ? up : down;
        }
        for (int c = 0; c < w; ++c) dense.set(r, c, dense.at(src, c));
    }
    return dense;
}

// ---------------------------------------------------------------------------
// Mask to 3D lanes
// ---------------------------------------------------------------------------

struct LiftConfig {
    bool smooth = true;            // spline-smooth each instance
    double smooth_step = 0.5;      // meters between smoothed samples
    double merge_heading_deg = 2.0;  // max heading difference to merge split instances
    double merge_offset_m = 0.3;     // max lateral offset to merge
    double merge_gap_m = 20.0;       // max forward gap to consider merging
};

namespace detail {

/// 8-connected components of the foreground mask in scan order.
inline std::vector<std::vector<PixelSeed>> connected_components(const SegmentationMask& mask) {
    const int h = mask.height(), w = mask.width();
    Grid<std::int32_t> comp(w, h, -1);
    std::vector<std::vector<PixelSeed>> components;
    std::vector<PixelSeed> stack;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (!mask.foreground(r, c) || comp.at(r, c) >= 0) continue;
            const auto id = static_cast<std::int32_t>(components.size());
            components.emplace_back();
            comp.at(r, c) = id;
            stack.push_back({c, r});
            while (!stack.empty()) {
                const PixelSeed p = stack.back();
                stack.pop_back();
                components[id].push_back(p);
                for (int dv = -1; dv <= 1; ++dv) {
                    for (int du = -1; du <= 1; ++du) {
                        const int nu = p.u + du, nv = p.v + dv;
                        if (nu < 0 || nu >= w || nv < 0 || nv >= h) continue;
                        if (mask.foreground(nv, nu) && comp.at(nv, nu) < 0) {
                            comp.at(nv, nu) = id;
                            stack.push_back({nu, nv});
                        }
                    }
                }
            }
        }
    }
    return components;
}

struct InstanceTrack {
    std::vector<Point3> points;  // ordered near to far
};

/// Merge instances whose end tangents line up (split lane markings). Both the
/// heading difference and the lateral offset of the continuation are tested
/// in the top view.
inline void merge_aligned(std::vector<InstanceTrack>& tracks, const LiftConfig& cfg) {
    auto heading = [](const InstanceTrack& t, bool at_end) {
        const std::size_t n = t.points.size();
        const std::size_t span = std::min<std::size_t>(n - 1, 3);
        const Point3 a = at_end ? t.points[n - 1 - span] : t.points[0];
        const Point3 b = at_end ? t.points[n - 1] : t.points[span];
        return std::atan2(b.x - a.x, b.z - a.z);
    };
    const double tol = cfg.merge_heading_deg * M_PI / 180.0;
    bool merged = true;
    while (merged) {
        merged = false;
        double best_gap = cfg.merge_gap_m;
        std::size_t best_a = 0, best_b = 0;
        for (std::size_t i = 0; i < tracks.size(); ++i) {
            for (std::size_t j = 0; j < tracks.size(); ++j) {
                if (i == j || tracks[i].points.empty() || tracks[j].points.empty()) continue;
                const Point3& tail = tracks[i].points.back();
                const Point3& head = tracks[j].points.front();
                const double gap = head.z - tail.z;
                if (gap <= 0.0 || gap >= best_gap) continue;
                const double h_i = heading(tracks[i], true);
                const double h_j = heading(tracks[j], false);
                if (std::abs(std::remainder(h_i - h_j, 2.0 * M_PI)) > tol) continue;
                // Lateral offset of j's head from i's extrapolated tail line.
                const double dx = head.x - (tail.x + std::tan(h_i) * gap);
                if (std::abs(dx * std::cos(h_i)) > cfg.merge_offset_m) continue;
                best_gap = gap;
                best_a = i;
                best_b = j;
                merged = true;
            }
        }
        if (merged) {
            auto& dst = tracks[best_a].points;
            auto& src = tracks[best_b].points;
            dst.insert(dst.end(), src.begin(), src.end());
            src.clear();
        }
    }
    std::erase_if(tracks, [](const InstanceTrack& t) { return t.points.empty(); });
}

}  // namespace detail

/// Reconstruct 3D lanes from a binary mask and the spatial predictions:
/// instances from 8-connected components, per-row centers refined by the
/// offset maps, depth decoded against the row anchors, back-projected through
/// the intrinsics and optionally spline-smoothed.
inline std::vector<Lane3D> lift_to_lanes(const SegmentationMask& mask, const OffsetMaps& offsets,
                                         const RowAnchors& anchors, const CameraIntrinsics& k,
                                         const LiftConfig& cfg = {}) {
    offsets.validate();
    anchors.validate();
    k.validate();
    if (!offsets.delta_u.same_shape(mask.values)) throw ShapeMismatch("mask/offset shapes differ");
    if (anchors.rows() != static_cast<std::size_t>(mask.height()))
        throw ShapeMismatch("anchor table length must equal the image height");

    const auto components = detail::connected_components(mask);
    std::vector<detail::InstanceTrack> tracks;
    for (const auto& comp : components) {
        // One refined point per image row: average the refined pixels and
        // decoded depths of the row's mask pixels.
        std::map<int, std::vector<PixelSeed>> rows;
        for (const PixelSeed& p : comp) rows[p.v].push_back(p);
        detail::InstanceTrack track;
        for (auto it = rows.rbegin(); it != rows.rend(); ++it) {  // bottom (near) rows first
            const auto refined = apply_offsets(it->second, offsets);
            double u_sum = 0.0, v_sum = 0.0, z_sum = 0.0;
            std::size_t n = 0;
            for (std::size_t i = 0; i < refined.size(); ++i) {
                const PixelSeed& seed = it->second[i];
                double z;
                try {
                    z = decode_depth(static_cast<std::size_t>(seed.v),
                                     offsets.delta_z.at(seed.v, seed.u), anchors);
                } catch (const NonPositiveDepth&) {
                    continue;  // unusable pixel
                }
                u_sum += refined[i].u;
                v_sum += refined[i].v;
                z_sum += z;
                ++n;
            }
            if (n == 0) continue;
            const Point3 p = backproject(u_sum / n, v_sum / n, z_sum / n, k);
            if (track.points.empty() || distance(track.points.back(), p) > 0.0) track.points.push_back(p);
        }
        if (track.points.size() >= 2) tracks.push_back(std::move(track));
    }

    detail::merge_aligned(tracks, cfg);

    std::vector<Lane3D> lanes;
    for (std::size_t i = 0; i < tracks.size(); ++i) {
        Lane3D lane;
        lane.lane_id = "lane_" + std::to_string(i);
        lane.points = std::move(tracks[i].points);
        if (cfg.smooth && polyline_length(lane.points) > cfg.smooth_step)
            lane = interpolate_lane(lane, cfg.smooth_step);
        if (lane.points.size() >= 2) lanes.push_back(std::move(lane));
    }
    return lanes;
}

}  // namespace lane3d
