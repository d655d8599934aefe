#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

namespace lane3d {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Base class for every validation / domain error thrown by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct NonPositiveDepth : Error {
    explicit NonPositiveDepth(const std::string& msg = "depth must be > 0") : Error(msg) {}
};
struct DegenerateLane : Error {
    explicit DegenerateLane(const std::string& msg = "lane is degenerate") : Error(msg) {}
};
struct NoGroundFound : Error {
    explicit NoGroundFound(const std::string& msg = "no ground points found") : Error(msg) {}
};
struct EmptyLabels : Error {
    explicit EmptyLabels(const std::string& msg = "label list is empty") : Error(msg) {}
};
struct OutOfBounds : Error {
    explicit OutOfBounds(const std::string& msg = "point outside raster bounds") : Error(msg) {}
};
struct InsufficientData : Error {
    explicit InsufficientData(const std::string& msg = "not enough data") : Error(msg) {}
};
struct EmptyDepth : Error {
    explicit EmptyDepth(const std::string& msg = "depth map has no valid pixel") : Error(msg) {}
};
struct ShapeMismatch : Error {
    explicit ShapeMismatch(const std::string& msg = "raster shapes differ") : Error(msg) {}
};
struct NoValidPixels : Error {
    explicit NoValidPixels(const std::string& msg = "valid-pixel mask is empty") : Error(msg) {}
};
struct ZeroForwardExtent : Error {
    explicit ZeroForwardExtent(const std::string& msg = "lane endpoints share the same z") : Error(msg) {}
};
struct NoValidLanes : Error {
    explicit NoValidLanes(const std::string& msg = "no lane with a valid slope") : Error(msg) {}
};
struct InvalidSpec : Error {
    explicit InvalidSpec(const std::string& msg = "invalid split spec") : Error(msg) {}
};
struct InvalidParams : Error {
    explicit InvalidParams(const std::string& msg = "invalid parameters") : Error(msg) {}
};
struct OutsideROI : Error {
    explicit OutsideROI(const std::string& msg = "lane has no cells inside the ROI") : Error(msg) {}
};
struct ParseError : Error {
    explicit ParseError(const std::string& msg) : Error(msg) {}
    ParseError(std::size_t line, const std::string& msg)
        : Error("line " + std::to_string(line) + ": " + msg), line_number(line) {}
    std::size_t line_number = 0;
};

// ---------------------------------------------------------------------------
// Geometry primitives
// ---------------------------------------------------------------------------

/// Point in the camera coordinate system: X right, Y down, Z forward, meters.
struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }

    bool operator==(const Point3& other) const = default;
};

inline Point3 operator+(const Point3& a, const Point3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Point3 operator-(const Point3& a, const Point3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Point3 operator*(const Point3& a, double s) { return {a.x * s, a.y * s, a.z * s}; }
inline double dot(const Point3& a, const Point3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(const Point3& a) { return std::sqrt(dot(a, a)); }
inline double distance(const Point3& a, const Point3& b) { return norm(a - b); }

/// Sub-pixel image coordinate.
struct Pixel {
    double u = 0.0;
    double v = 0.0;

    bool finite() const { return std::isfinite(u) && std::isfinite(v); }
};

inline double distance(const Pixel& a, const Pixel& b) {
    return std::hypot(a.u - b.u, a.v - b.v);
}

struct ImageSize {
    int width = 0;
    int height = 0;
};

// ---------------------------------------------------------------------------
// Pinhole intrinsics
// ---------------------------------------------------------------------------

/// Pinhole parameters. Skew is carried through all projection math; it is 0
/// for every real camera this library targets.
struct CameraIntrinsics {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    double skew = 0.0;

    CameraIntrinsics() = default;
    CameraIntrinsics(double fx_, double fy_, double cx_, double cy_, double skew_ = 0.0)
        : fx(fx_), fy(fy_), cx(cx_), cy(cy_), skew(skew_) {}

    bool valid() const {
        return fx > 0.0 && fy > 0.0 && std::isfinite(fx) && std::isfinite(fy) &&
               std::isfinite(cx) && std::isfinite(cy) && std::isfinite(skew);
    }

    void validate() const {
        if (!valid()) throw InvalidParams("camera intrinsics invalid: fx, fy must be positive and all fields finite");
    }

    Eigen::Matrix3d matrix() const {
        Eigen::Matrix3d k;
        k << fx, skew, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
        return k;
    }
};

// ---------------------------------------------------------------------------
// Rigid transform (sensor extrinsics)
// ---------------------------------------------------------------------------

struct RigidTransform {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    static RigidTransform identity() { return RigidTransform{}; }

    /// Orthonormal within 1e-9 and det = +1 within 1e-9.
    bool valid() const {
        const Eigen::Matrix3d rtr = rotation.transpose() * rotation;
        if ((rtr - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9) return false;
        if (std::abs(rotation.determinant() - 1.0) > 1e-9) return false;
        return translation.allFinite();
    }

    void validate() const {
        if (!valid()) throw InvalidParams("rigid transform invalid: rotation must be orthonormal with det +1");
    }

    Point3 apply(const Point3& p) const {
        const Eigen::Vector3d v = rotation * Eigen::Vector3d(p.x, p.y, p.z) + translation;
        return {v.x(), v.y(), v.z()};
    }

    RigidTransform inverse() const {
        RigidTransform inv;
        inv.rotation = rotation.transpose();
        inv.translation = -(rotation.transpose() * translation);
        return inv;
    }
};

// ---------------------------------------------------------------------------
// Lane polylines
// ---------------------------------------------------------------------------

/// Ordered polyline of 3D lane points in camera coordinates.
struct Lane3D {
    std::string lane_id;
    std::vector<Point3> points;

    Lane3D() = default;
    Lane3D(std::string id, std::vector<Point3> pts) : lane_id(std::move(id)), points(std::move(pts)) {}

    bool valid() const {
        if (points.size() < 2) return false;
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (!points[i].finite() || points[i].z <= 0.0) return false;
            if (i > 0 && distance(points[i], points[i - 1]) == 0.0) return false;
        }
        return true;
    }

    void validate() const {
        if (points.size() < 2) throw DegenerateLane("lane '" + lane_id + "' has fewer than 2 points");
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (!points[i].finite())
                throw InvalidParams("lane '" + lane_id + "' point " + std::to_string(i) + " is not finite");
            if (points[i].z <= 0.0)
                throw NonPositiveDepth("lane '" + lane_id + "' point " + std::to_string(i) + " has z <= 0");
            if (i > 0 && distance(points[i], points[i - 1]) == 0.0)
                throw InvalidParams("lane '" + lane_id + "' has duplicate consecutive points at " + std::to_string(i));
        }
    }
};

/// Ordered polyline of 2D lane points in image pixels (sub-pixel precision).
struct Lane2D {
    std::string lane_id;
    std::vector<Pixel> points;

    Lane2D() = default;
    Lane2D(std::string id, std::vector<Pixel> pts) : lane_id(std::move(id)), points(std::move(pts)) {}

    bool valid() const {
        if (points.size() < 2) return false;
        for (const Pixel& p : points)
            if (!p.finite()) return false;
        return true;
    }
};

}  // namespace lane3d
