#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "lane3d/rng.hpp"
#include "lane3d/sweep.hpp"
#include "lane3d/types.hpp"

namespace lane3d {

struct GroundSegConfig {
    // Coarse height interval (sensor-frame y, downward positive). Estimated
    // from the sweep's height histogram when unset.
    std::optional<double> height_min;
    std::optional<double> height_max;
    int seed_count = 5;
    double growth_normal_tol_deg = 10.0;
    // Neighbor radius for normals and region growth. Must exceed the ring
    // spacing at the far end of the range of interest (~z^2 * delta_elev / h
    // for a spinning LiDAR), otherwise growth cannot bridge rings.
    double growth_radius = 2.0;
    // Seed window "in front of the vehicle": forward z range, lateral bound.
    double seed_z_min = 5.0;
    double seed_z_max = 15.0;
    double seed_x_max = 4.0;
    std::uint64_t rng_seed = 1234;

    void validate() const {
        if (height_min && height_max && !(*height_min < *height_max))
            throw InvalidParams("height_min must be < height_max");
        if (seed_count < 1) throw InvalidParams("seed_count must be >= 1");
        if (!(growth_normal_tol_deg > 0.0) || growth_normal_tol_deg >= 90.0)
            throw InvalidParams("growth_normal_tol_deg must be in (0, 90)");
        if (!(growth_radius > 0.0)) throw InvalidParams("growth_radius must be > 0");
    }
};

namespace detail {

/// The 27 neighbor-cell offsets ordered center first, so capped gathers
/// terminate before touching far corner cells.
inline const std::array<std::array<int, 3>, 27>& cell_offsets() {
    static const auto offsets = [] {
        std::array<std::array<int, 3>, 27> o{};
        int n = 0;
        for (int dx = -1; dx <= 1; ++dx)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dz = -1; dz <= 1; ++dz) o[n++] = {dx, dy, dz};
        std::stable_sort(o.begin(), o.end(), [](const auto& a, const auto& b) {
            return a[0] * a[0] + a[1] * a[1] + a[2] * a[2] < b[0] * b[0] + b[1] * b[1] + b[2] * b[2];
        });
        return o;
    }();
    return offsets;
}

/// Uniform hash grid over point indices; cell size = neighbor radius.
class PointGrid {
public:
    PointGrid(const std::vector<Point3>& pts, double cell) : cell_(cell) {
        for (std::uint32_t i = 0; i < pts.size(); ++i) {
            const std::uint64_t k = key(pts[i]);
            const auto it = cell_ids_.find(k);
            std::uint32_t id;
            if (it == cell_ids_.end()) {
                id = static_cast<std::uint32_t>(cells_.size());
                cell_ids_.emplace(k, id);
                cells_.emplace_back();
            } else {
                id = it->second;
            }
            cells_[id].push_back(i);
            cell_of_point_.push_back(id);
        }
    }

    std::size_t cell_count() const { return cells_.size(); }
    std::uint32_t cell_of(std::uint32_t point_index) const { return cell_of_point_[point_index]; }
    const std::vector<std::uint32_t>& cell_points(std::uint32_t cell_id) const { return cells_[cell_id]; }

    /// Visit points of the (up to 27) cells around p, nearest cells first;
    /// fn returning false stops the scan early.
    template <typename Fn>
    void for_each_near(const Point3& p, Fn&& fn) const {
        const std::int64_t cx = coord(p.x), cy = coord(p.y), cz = coord(p.z);
        for (const auto& d : cell_offsets()) {
            const auto it = cell_ids_.find(pack(cx + d[0], cy + d[1], cz + d[2]));
            if (it == cell_ids_.end()) continue;
            for (std::uint32_t idx : cells_[it->second])
                if (!fn(idx)) return;
        }
    }

    /// Visit the ids of the existing cells around p.
    template <typename Fn>
    void for_each_near_cell(const Point3& p, Fn&& fn) const {
        const std::int64_t cx = coord(p.x), cy = coord(p.y), cz = coord(p.z);
        for (const auto& d : cell_offsets()) {
            const auto it = cell_ids_.find(pack(cx + d[0], cy + d[1], cz + d[2]));
            if (it != cell_ids_.end()) fn(it->second);
        }
    }

private:
    std::int64_t coord(double v) const { return static_cast<std::int64_t>(std::floor(v / cell_)); }
    std::uint64_t key(const Point3& p) const { return pack(coord(p.x), coord(p.y), coord(p.z)); }
    static std::uint64_t pack(std::int64_t x, std::int64_t y, std::int64_t z) {
        const std::uint64_t a = static_cast<std::uint64_t>(x + (1 << 20));
        const std::uint64_t b = static_cast<std::uint64_t>(y + (1 << 20));
        const std::uint64_t c = static_cast<std::uint64_t>(z + (1 << 20));
        return (a << 42) ^ (b << 21) ^ c;
    }

    double cell_;
    std::unordered_map<std::uint64_t, std::uint32_t> cell_ids_;
    std::vector<std::vector<std::uint32_t>> cells_;
    std::vector<std::uint32_t> cell_of_point_;
};

}  // namespace detail

/// Coarse ground-height interval from the sweep: the percentile band of
/// sensor-frame y around the mode of the height histogram.
inline std::pair<double, double> estimate_ground_band(const LidarSweep& sweep) {
    if (sweep.empty()) throw NoGroundFound("empty sweep");
    double lo = 1e300, hi = -1e300;
    for (const LidarPoint& p : sweep.points) {
        lo = std::min(lo, p.y);
        hi = std::max(hi, p.y);
    }
    const double bin = 0.1;
    const int nbins = std::max(1, static_cast<int>((hi - lo) / bin) + 1);
    std::vector<int> hist(nbins, 0);
    for (const LidarPoint& p : sweep.points)
        ++hist[std::min(nbins - 1, static_cast<int>((p.y - lo) / bin))];
    const int mode = static_cast<int>(std::max_element(hist.begin(), hist.end()) - hist.begin());
    const double mode_y = lo + (mode + 0.5) * bin;

    std::vector<double> window;
    for (const LidarPoint& p : sweep.points)
        if (std::abs(p.y - mode_y) <= 1.5) window.push_back(p.y);
    if (window.empty()) throw NoGroundFound("height histogram has no mass around its mode");
    std::sort(window.begin(), window.end());
    auto pct = [&](double q) { return window[static_cast<std::size_t>(q * (window.size() - 1))]; };
    // Small slack keeps boundary points from being knife-edged out.
    return {pct(0.05) - 0.1, pct(0.95) + 0.1};
}

/// Coarse-to-fine ground extraction: a height-interval filter followed by
/// region growth from random seeds in front of the vehicle, expanding only
/// across neighbors whose local plane normals agree. Returns indices into the
/// sweep (the output is a subset of the input by identity).
inline std::vector<std::uint32_t> segment_ground(const LidarSweep& sweep, const GroundSegConfig& cfg = {}) {
    cfg.validate();
    if (sweep.empty()) throw NoGroundFound("empty sweep");

    double band_lo, band_hi;
    if (cfg.height_min && cfg.height_max) {
        band_lo = *cfg.height_min;
        band_hi = *cfg.height_max;
    } else {
        std::tie(band_lo, band_hi) = estimate_ground_band(sweep);
        if (cfg.height_min) band_lo = *cfg.height_min;
        if (cfg.height_max) band_hi = *cfg.height_max;
    }

    std::vector<Point3> all_pts;
    all_pts.reserve(sweep.size());
    for (const LidarPoint& p : sweep.points) all_pts.push_back(p.position());

    std::vector<std::uint32_t> coarse;  // indices into sweep
    std::vector<Point3> pts;
    for (std::uint32_t i = 0; i < sweep.points.size(); ++i) {
        const LidarPoint& p = sweep.points[i];
        if (p.y >= band_lo && p.y <= band_hi && p.finite()) {
            coarse.push_back(i);
            pts.push_back(p.position());
        }
    }
    if (coarse.empty()) throw NoGroundFound("coarse height filter kept no points");

    const detail::PointGrid full_grid(all_pts, cfg.growth_radius);

    // Local plane normals by PCA over full-cloud neighborhoods. Using the
    // whole sweep (not just the coarse band) keeps the base strip of a wall
    // looking like a wall rather than a shelf of the ground. The estimate is
    // taken at the finest scale whose neighborhood is planar: a small ball
    // keeps surfaces pure where the cloud is dense (corners stay sharp), the
    // full growth radius bridges sparse far rings.
    constexpr std::size_t kPcaPerCell = 12;
    const double r2 = cfg.growth_radius * cfg.growth_radius;
    const double r_small = std::min(0.4, cfg.growth_radius);
    const std::size_t n = pts.size();
    const detail::PointGrid small_grid(all_pts, r_small);
    std::vector<Eigen::Vector3d> normals(n, Eigen::Vector3d::Zero());
    std::vector<char> normal_ok(n, 0);
    std::vector<std::uint32_t> scratch;

    auto estimate_normal = [&](const Point3& at, double radius_sq, const detail::PointGrid& grid,
                               Eigen::Vector3d& out) {
        scratch.clear();
        grid.for_each_near_cell(at, [&](std::uint32_t cell) {
            const auto& members = grid.cell_points(cell);
            const std::size_t stride = std::max<std::size_t>(1, members.size() / kPcaPerCell);
            for (std::size_t m = 0; m < members.size(); m += stride) {
                const std::uint32_t j = members[m];
                const Point3 d = all_pts[j] - at;
                if (dot(d, d) <= radius_sq) scratch.push_back(j);
            }
        });
        if (scratch.size() < 5) return false;
        Eigen::Vector3d mean = Eigen::Vector3d::Zero();
        for (std::uint32_t j : scratch) mean += Eigen::Vector3d(all_pts[j].x, all_pts[j].y, all_pts[j].z);
        mean /= static_cast<double>(scratch.size());
        Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
        for (std::uint32_t j : scratch) {
            const Eigen::Vector3d d = Eigen::Vector3d(all_pts[j].x, all_pts[j].y, all_pts[j].z) - mean;
            cov += d * d.transpose();
        }
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig;
        eig.computeDirect(cov);
        // Degenerate (collinear) neighborhoods leave the plane undetermined.
        if (eig.eigenvalues()(1) < 1e-6 * eig.eigenvalues()(2)) return false;
        out = eig.eigenvectors().col(0);
        return true;
    };

    for (std::size_t i = 0; i < n; ++i)
        if (estimate_normal(pts[i], r_small * r_small, small_grid, normals[i]) ||
            estimate_normal(pts[i], r2, full_grid, normals[i]))
            normal_ok[i] = 1;

    // Seeds: random coarse points in the near-forward window with near-vertical
    // normals.
    const double cos_tol = std::cos(cfg.growth_normal_tol_deg * M_PI / 180.0);
    std::vector<std::uint32_t> eligible;
    for (std::uint32_t i = 0; i < n; ++i)
        if (pts[i].z >= cfg.seed_z_min && pts[i].z <= cfg.seed_z_max && std::abs(pts[i].x) <= cfg.seed_x_max &&
            normal_ok[i] && std::abs(normals[i].y()) >= cos_tol)
            eligible.push_back(i);
    if (eligible.empty()) throw NoGroundFound("no viable seed in the forward window");

    const detail::PointGrid coarse_grid(pts, cfg.growth_radius);
    // Unvisited count per cell lets the flood skip fully absorbed cells.
    std::vector<std::uint32_t> remaining(coarse_grid.cell_count());
    for (std::uint32_t c = 0; c < remaining.size(); ++c)
        remaining[c] = static_cast<std::uint32_t>(coarse_grid.cell_points(c).size());

    Rng rng(cfg.rng_seed);
    std::vector<std::uint32_t> queue;
    std::vector<std::uint32_t> region_seed(n, 0);  // seed point of each grown point's region
    std::vector<char> visited(n, 0);
    auto visit = [&](std::uint32_t j, std::uint32_t seed) {
        visited[j] = 1;
        region_seed[j] = seed;
        --remaining[coarse_grid.cell_of(j)];
        queue.push_back(j);
    };
    for (int s = 0; s < cfg.seed_count; ++s) {
        const std::uint32_t pick = eligible[rng.uniform_index(eligible.size())];
        if (!visited[pick]) visit(pick, pick);
    }

    // Flood fill over the coarse subset. Candidates are compared against the
    // normal of their region's seed plane, which stops the growth from
    // creeping around a corner one small tilt at a time.
    std::size_t head = 0;
    while (head < queue.size()) {
        const std::uint32_t cur = queue[head++];
        const Eigen::Vector3d& seed_normal = normals[region_seed[cur]];
        coarse_grid.for_each_near_cell(pts[cur], [&](std::uint32_t cell) {
            if (remaining[cell] == 0) return;
            for (std::uint32_t j : coarse_grid.cell_points(cell)) {
                if (!visited[j] && normal_ok[j]) {
                    const Point3 d = pts[j] - pts[cur];
                    if (dot(d, d) <= r2 && std::abs(seed_normal.dot(normals[j])) >= cos_tol)
                        visit(j, region_seed[cur]);
                }
            }
        });
    }

    std::vector<std::uint32_t> ground;
    ground.reserve(queue.size());
    for (std::uint32_t i = 0; i < n; ++i)
        if (visited[i]) ground.push_back(coarse[i]);
    return ground;
}

}  // namespace lane3d
