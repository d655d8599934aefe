#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "lane3d/types.hpp"

namespace lane3d {

/// Cumulative chord length at each vertex; front() == 0.
inline std::vector<double> cumulative_arc_length(std::span<const Point3> pts) {
    std::vector<double> s(pts.size(), 0.0);
    for (std::size_t i = 1; i < pts.size(); ++i) s[i] = s[i - 1] + distance(pts[i], pts[i - 1]);
    return s;
}

inline double polyline_length(std::span<const Point3> pts) {
    double total = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) total += distance(pts[i], pts[i - 1]);
    return total;
}

/// Point at arc-length position s along the polyline (clamped to [0, L]).
inline Point3 point_at_arc_length(std::span<const Point3> pts, std::span<const double> cum, double s) {
    if (s <= 0.0) return pts.front();
    if (s >= cum.back()) return pts.back();
    const auto it = std::upper_bound(cum.begin(), cum.end(), s);
    const std::size_t i = static_cast<std::size_t>(it - cum.begin());
    const double seg = cum[i] - cum[i - 1];
    const double t = seg > 0.0 ? (s - cum[i - 1]) / seg : 0.0;
    return pts[i - 1] + (pts[i] - pts[i - 1]) * t;
}

/// Resample a polyline at uniform arc-length spacing `step`, endpoints kept
/// exactly. The final interval is shorter when the length is not a multiple
/// of step.
inline std::vector<Point3> resample_polyline(std::span<const Point3> pts, double step) {
    const std::vector<double> cum = cumulative_arc_length(pts);
    const double total = cum.back();
    std::vector<Point3> out;
    out.push_back(pts.front());
    for (double s = step; s < total; s += step) out.push_back(point_at_arc_length(pts, cum, s));
    out.push_back(pts.back());
    return out;
}

/// Resample into exactly n >= 2 points with equal spacing, endpoints kept.
inline std::vector<Point3> resample_polyline_count(std::span<const Point3> pts, std::size_t n) {
    const std::vector<double> cum = cumulative_arc_length(pts);
    const double total = cum.back();
    std::vector<Point3> out;
    out.reserve(n);
    out.push_back(pts.front());
    for (std::size_t i = 1; i + 1 < n; ++i)
        out.push_back(point_at_arc_length(pts, cum, total * static_cast<double>(i) / static_cast<double>(n - 1)));
    out.push_back(pts.back());
    return out;
}

/// Resample `lane` every `step` meters of cumulative chord length.
inline Lane3D arc_length_resample(const Lane3D& lane, double step) {
    if (step <= 0.0) throw InvalidParams("resample step must be > 0");
    lane.validate();
    if (polyline_length(lane.points) < step)
        throw DegenerateLane("lane '" + lane.lane_id + "' shorter than resample step");
    Lane3D out;
    out.lane_id = lane.lane_id;
    out.points = resample_polyline(lane.points, step);
    // Collapse a final interval that degenerated to (numerically) zero.
    if (out.points.size() > 2 && distance(out.points.back(), out.points[out.points.size() - 2]) < 1e-12)
        out.points.erase(out.points.end() - 2);
    return out;
}

/// Distance from p to segment [a, b].
inline double point_segment_distance(const Point3& p, const Point3& a, const Point3& b) {
    const Point3 ab = b - a;
    const double len2 = dot(ab, ab);
    if (len2 == 0.0) return distance(p, a);
    const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
    return distance(p, a + ab * t);
}

/// Distance from p to the nearest point on the polyline (continuous over
/// segments, not vertex-only).
inline double point_polyline_distance(const Point3& p, std::span<const Point3> pts) {
    if (pts.size() == 1) return distance(p, pts.front());
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < pts.size(); ++i)
        best = std::min(best, point_segment_distance(p, pts[i - 1], pts[i]));
    return best;
}

}  // namespace lane3d
