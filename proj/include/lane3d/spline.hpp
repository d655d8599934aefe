#pragma once

#include <span>
#include <vector>

#include "lane3d/polyline.hpp"
#include "lane3d/types.hpp"

namespace lane3d {

/// Natural cubic spline through (t_i, y_i), t strictly increasing. Second
/// derivative is zero at both ends; two knots degenerate to the straight
/// segment.
class CubicSpline1D {
public:
    CubicSpline1D() = default;

    CubicSpline1D(std::vector<double> t, std::vector<double> y) : t_(std::move(t)), y_(std::move(y)) {
        const std::size_t n = t_.size();
        if (n < 2 || y_.size() != n) throw InvalidParams("spline needs >= 2 knots and matching values");
        for (std::size_t i = 1; i < n; ++i)
            if (!(t_[i] > t_[i - 1])) throw InvalidParams("spline knots must be strictly increasing");
        m_.assign(n, 0.0);
        if (n == 2) return;

        // Tridiagonal system for interior second derivatives (Thomas solve).
        std::vector<double> diag(n, 0.0), rhs(n, 0.0), upper(n, 0.0);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double h0 = t_[i] - t_[i - 1];
            const double h1 = t_[i + 1] - t_[i];
            diag[i] = 2.0 * (h0 + h1);
            upper[i] = h1;
            rhs[i] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
        }
        for (std::size_t i = 2; i + 1 < n; ++i) {
            const double w = (t_[i] - t_[i - 1]) / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        for (std::size_t i = n - 2; i >= 1; --i) {
            m_[i] = (rhs[i] - upper[i] * m_[i + 1]) / diag[i];
            if (i == 1) break;
        }
    }

    double operator()(double t) const {
        const std::size_t n = t_.size();
        std::size_t i = 1;
        if (t >= t_[n - 1]) {
            i = n - 1;
        } else if (t > t_[0]) {
            i = static_cast<std::size_t>(std::upper_bound(t_.begin(), t_.end(), t) - t_.begin());
        }
        const double h = t_[i] - t_[i - 1];
        const double a = (t_[i] - t) / h;
        const double b = (t - t_[i - 1]) / h;
        // Outside the knot range this continues the end cubic.
        return a * y_[i - 1] + b * y_[i] +
               ((a * a * a - a) * m_[i - 1] + (b * b * b - b) * m_[i]) * (h * h) / 6.0;
    }

    double derivative(double t) const {
        const std::size_t n = t_.size();
        std::size_t i = 1;
        if (t >= t_[n - 1]) {
            i = n - 1;
        } else if (t > t_[0]) {
            i = static_cast<std::size_t>(std::upper_bound(t_.begin(), t_.end(), t) - t_.begin());
        }
        const double h = t_[i] - t_[i - 1];
        const double a = (t_[i] - t) / h;
        const double b = (t - t_[i - 1]) / h;
        return (y_[i] - y_[i - 1]) / h +
               ((1.0 - 3.0 * a * a) * m_[i - 1] + (3.0 * b * b - 1.0) * m_[i]) * h / 6.0;
    }

    double t_min() const { return t_.front(); }
    double t_max() const { return t_.back(); }

private:
    std::vector<double> t_, y_, m_;
};

/// 3D curve: one natural spline per coordinate, parameterized by cumulative
/// chord length of the knots.
class LaneSpline {
public:
    explicit LaneSpline(std::span<const Point3> pts) {
        if (pts.size() < 2) throw DegenerateLane("spline needs >= 2 points");
        std::vector<double> t = cumulative_arc_length(pts);
        std::vector<double> xs(pts.size()), ys(pts.size()), zs(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) {
            xs[i] = pts[i].x;
            ys[i] = pts[i].y;
            zs[i] = pts[i].z;
        }
        x_ = CubicSpline1D(t, std::move(xs));
        y_ = CubicSpline1D(t, std::move(ys));
        z_ = CubicSpline1D(std::move(t), std::move(zs));
    }

    Point3 operator()(double t) const { return {x_(t), y_(t), z_(t)}; }

    Point3 tangent(double t) const { return {x_.derivative(t), y_.derivative(t), z_.derivative(t)}; }

    double length() const { return z_.t_max(); }

private:
    CubicSpline1D x_, y_, z_;
};

/// Densify a lane with a natural cubic spline through its points, sampled
/// every `sample_step` meters of knot chord length (endpoints always kept).
inline Lane3D interpolate_lane(const Lane3D& lane, double sample_step) {
    if (lane.points.size() < 2) throw DegenerateLane("lane '" + lane.lane_id + "' has fewer than 2 points");
    if (sample_step <= 0.0) throw InvalidParams("sample step must be > 0");
    const LaneSpline spline(lane.points);
    const double total = spline.length();
    Lane3D out;
    out.lane_id = lane.lane_id;
    out.points.push_back(spline(0.0));
    for (double s = sample_step; s < total; s += sample_step) {
        Point3 p = spline(s);
        if (distance(p, out.points.back()) > 0.0) out.points.push_back(p);
    }
    Point3 last = spline(total);
    if (distance(last, out.points.back()) == 0.0) out.points.pop_back();
    out.points.push_back(last);
    return out;
}

}  // namespace lane3d
