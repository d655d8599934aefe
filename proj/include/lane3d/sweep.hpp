#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "lane3d/types.hpp"

namespace lane3d {

/// One LiDAR return in the sensor frame (X right, Y down, Z forward).
struct LidarPoint {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    std::uint16_t beam_id = 0;

    Point3 position() const { return {x, y, z}; }
    bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

struct LidarSweep {
    std::vector<LidarPoint> points;

    bool empty() const { return points.empty(); }
    std::size_t size() const { return points.size(); }
};

/// Ring index for data without beam ids: elevation angle quantized into
/// fixed-width bins, mimicking spinning-LiDAR ring structure.
inline std::uint16_t quantize_beam(const Point3& p, double bin_deg = 0.4) {
    const double elevation_deg = std::atan2(-p.y, std::hypot(p.x, p.z)) * 180.0 / M_PI;
    const double shifted = (elevation_deg + 90.0) / bin_deg;  // non-negative for any direction
    return static_cast<std::uint16_t>(shifted);
}

}  // namespace lane3d
