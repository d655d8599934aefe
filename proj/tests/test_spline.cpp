#include <catch2/catch.hpp>

#include <cmath>

#include "lane3d/polyline.hpp"
#include "lane3d/spline.hpp"

using namespace lane3d;

TEST_CASE("two-point lane interpolates to the straight chord") {
    const Lane3D lane{"chord", {{1, 1.5, 5}, {3, 1.7, 25}}};
    const Lane3D out = interpolate_lane(lane, 0.5);
    REQUIRE(out.points.size() >= 2);
    for (const Point3& p : out.points)
        CHECK(point_segment_distance(p, lane.points.front(), lane.points.back()) < 1e-9);
    CHECK(distance(out.points.front(), lane.points.front()) < 1e-12);
    CHECK(distance(out.points.back(), lane.points.back()) < 1e-12);
}

TEST_CASE("spline passes through every input knot") {
    const Lane3D lane{"knots", {{0, 1.6, 5}, {0.4, 1.55, 10}, {1.1, 1.5, 15}, {2.3, 1.5, 20}}};
    const LaneSpline spline(lane.points);
    const auto cum = cumulative_arc_length(lane.points);
    for (std::size_t i = 0; i < lane.points.size(); ++i)
        CHECK(distance(spline(cum[i]), lane.points[i]) < 1e-9);
}

TEST_CASE("interpolated samples reproduce knots when the step divides the spacing") {
    // Knots exactly 2 m apart along z, sampled at 0.5 m.
    Lane3D lane{"grid", {}};
    for (int i = 0; i <= 5; ++i) lane.points.push_back({0.0, 1.6, 5.0 + 2.0 * i});
    const Lane3D out = interpolate_lane(lane, 0.5);
    for (const Point3& knot : lane.points) {
        double best = 1e9;
        for (const Point3& p : out.points) best = std::min(best, distance(p, knot));
        CHECK(best < 1e-9);
    }
}

TEST_CASE("spline tracks an analytic parabola within 1e-3") {
    // Lane-like stretch of z = x^2: gentle curvature, knots ~0.5 m apart in
    // arc length. The analytic curve is the oracle; deviation is measured as
    // distance from each resampled point to a dense polyline of the truth.
    std::vector<Point3> dense_truth;
    for (double x = 2.95; x <= 7.05; x += 0.0005) dense_truth.push_back({x, 1.6, x * x});

    Lane3D lane{"parabola", {}};
    double x = 3.0;
    while (x <= 7.0) {
        lane.points.push_back({x, 1.6, x * x});
        // Advance x so consecutive knots are ~0.5 apart in arc length.
        x += 0.5 / std::sqrt(1.0 + 4.0 * x * x);
    }
    REQUIRE(lane.points.size() >= 10);

    const Lane3D out = interpolate_lane(lane, 0.05);
    double worst = 0.0;
    for (const Point3& p : out.points) worst = std::max(worst, point_polyline_distance(p, dense_truth));
    CHECK(worst < 1e-3);
}

TEST_CASE("interpolation endpoints are the lane endpoints") {
    const Lane3D lane{"ends", {{0, 1.6, 4}, {0.5, 1.6, 9}, {0.2, 1.6, 13}}};
    const Lane3D out = interpolate_lane(lane, 0.7);
    CHECK(distance(out.points.front(), lane.points.front()) < 1e-12);
    CHECK(distance(out.points.back(), lane.points.back()) < 1e-12);
}

TEST_CASE("interpolate_lane rejects degenerate input") {
    CHECK_THROWS_AS(interpolate_lane(Lane3D{"one", {{0, 0, 5}}}, 0.5), DegenerateLane);
}

TEST_CASE("one-dimensional spline reproduces a cubic polynomial exactly in the interior") {
    // A single natural spline cannot match a cubic near free ends, but with
    // clamped-like dense knots the interior agrees closely.
    auto f = [](double t) { return 0.3 * t * t * t - t * t + 2.0 * t + 1.0; };
    std::vector<double> t, y;
    for (double v = 0.0; v <= 10.0 + 1e-9; v += 0.25) {
        t.push_back(v);
        y.push_back(f(v));
    }
    const CubicSpline1D s(t, y);
    for (double v = 3.0; v <= 7.0; v += 0.05) CHECK(std::abs(s(v) - f(v)) < 1e-6);
}
