#pragma once

#include <span>
#include <vector>

#include "lane3d/types.hpp"

namespace lane3d {

/// Project a camera-frame point to a sub-pixel image coordinate:
/// z * [u, v, 1]^T = K * [x, y, z]^T.
inline Pixel project(const Point3& p, const CameraIntrinsics& k) {
    if (p.z <= 0.0) throw NonPositiveDepth("cannot project point with z <= 0");
    const double u = (k.fx * p.x + k.skew * p.y) / p.z + k.cx;
    const double v = k.fy * p.y / p.z + k.cy;
    return {u, v};
}

/// Restore the camera-frame point of pixel (u, v) at depth d:
///   z = d
///   y = z / fy * (v - cy)
///   x = z / fx * [(u - cx) - skew / fy * (v - cy)]
inline Point3 backproject(double u, double v, double d, const CameraIntrinsics& k) {
    if (d <= 0.0) throw NonPositiveDepth("cannot back-project with depth <= 0");
    const double y = d / k.fy * (v - k.cy);
    const double x = d / k.fx * ((u - k.cx) - k.skew / k.fy * (v - k.cy));
    return {x, y, d};
}

inline Point3 backproject(const Pixel& px, double d, const CameraIntrinsics& k) {
    return backproject(px.u, px.v, d, k);
}

/// Apply a rigid transform to a cloud: p' = R p + t. Empty input yields empty
/// output.
inline std::vector<Point3> transform_cloud(std::span<const Point3> points, const RigidTransform& t) {
    std::vector<Point3> out;
    out.reserve(points.size());
    for (const Point3& p : points) out.push_back(t.apply(p));
    return out;
}

inline std::vector<Point3> transform_cloud(const std::vector<Point3>& points, const RigidTransform& t) {
    return transform_cloud(std::span<const Point3>(points), t);
}

}  // namespace lane3d
