#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <span>
#include <vector>

#include "lane3d/polyline.hpp"
#include "lane3d/types.hpp"

namespace lane3d {

/// Axis-aligned evaluation window in the z-x (top view) plane, meters.
struct TopviewROI {
    double x_min = -10.0;
    double x_max = 10.0;
    double z_min = 0.0;
    double z_max = 100.0;
};

struct MatchConfig {
    double iou_threshold = 0.3;
    double tau_cd = 0.3;           // meters
    double sample_step = 0.5;      // meters between ground-truth samples
    double topview_halfwidth = 0.5;  // meters
    double raster_cell = 0.1;      // meters
    int min_samples = 10;          // floor on the number of gt samples
    TopviewROI roi;

    void validate() const {
        if (!(iou_threshold > 0.0) || iou_threshold > 1.0) throw InvalidParams("iou_threshold must be in (0, 1]");
        if (!(tau_cd > 0.0)) throw InvalidParams("tau_cd must be > 0");
        if (!(sample_step > 0.0)) throw InvalidParams("sample_step must be > 0");
        if (!(topview_halfwidth > 0.0)) throw InvalidParams("topview_halfwidth must be > 0");
        if (!(raster_cell > 0.0)) throw InvalidParams("raster_cell must be > 0");
        if (min_samples < 2) throw InvalidParams("min_samples must be >= 2");
        if (!(roi.x_max > roi.x_min) || !(roi.z_max > roi.z_min)) throw InvalidParams("roi must be non-empty");
    }
};

/// Occupancy bitmap of one lane in the top view. Word-packed so that
/// intersection / union counts reduce to popcounts.
class TopviewRaster {
public:
    TopviewRaster(const MatchConfig& cfg)
        : nx_(static_cast<int>(std::ceil((cfg.roi.x_max - cfg.roi.x_min) / cfg.raster_cell))),
          nz_(static_cast<int>(std::ceil((cfg.roi.z_max - cfg.roi.z_min) / cfg.raster_cell))),
          words_((static_cast<std::size_t>(nx_) * nz_ + 63) / 64, 0) {}

    void set(int iz, int ix) {
        const std::size_t bit = static_cast<std::size_t>(iz) * nx_ + ix;
        words_[bit >> 6] |= (1ULL << (bit & 63));
    }

    std::size_t count() const {
        std::size_t n = 0;
        for (std::uint64_t w : words_) n += static_cast<std::size_t>(std::popcount(w));
        return n;
    }

    int nx() const { return nx_; }
    int nz() const { return nz_; }

    static double iou(const TopviewRaster& a, const TopviewRaster& b) {
        std::size_t inter = 0, uni = 0;
        for (std::size_t i = 0; i < a.words_.size(); ++i) {
            inter += static_cast<std::size_t>(std::popcount(a.words_[i] & b.words_[i]));
            uni += static_cast<std::size_t>(std::popcount(a.words_[i] | b.words_[i]));
        }
        return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
    }

private:
    int nx_, nz_;
    std::vector<std::uint64_t> words_;
};

/// Stamp the lane into the top view: every cell whose center lies within
/// `topview_halfwidth` of the z-x projection of the polyline.
inline TopviewRaster rasterize_topview(const Lane3D& lane, const MatchConfig& cfg) {
    TopviewRaster raster(cfg);
    const double cell = cfg.raster_cell;
    const double hw = cfg.topview_halfwidth;
    const auto& pts = lane.points;
    auto clamp_ix = [&](double x) {
        return std::clamp(static_cast<int>(std::floor((x - cfg.roi.x_min) / cell)), 0, raster.nx() - 1);
    };
    auto clamp_iz = [&](double z) {
        return std::clamp(static_cast<int>(std::floor((z - cfg.roi.z_min) / cell)), 0, raster.nz() - 1);
    };
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const double ax = pts[i].x, az = pts[i].z;
        const double bx = pts[i + 1].x, bz = pts[i + 1].z;
        const double lo_x = std::min(ax, bx) - hw, hi_x = std::max(ax, bx) + hw;
        const double lo_z = std::min(az, bz) - hw, hi_z = std::max(az, bz) + hw;
        if (hi_x < cfg.roi.x_min || lo_x > cfg.roi.x_max || hi_z < cfg.roi.z_min || lo_z > cfg.roi.z_max) continue;
        const int ix0 = clamp_ix(lo_x), ix1 = clamp_ix(hi_x);
        const int iz0 = clamp_iz(lo_z), iz1 = clamp_iz(hi_z);
        const double dx = bx - ax, dz = bz - az;
        const double len2 = dx * dx + dz * dz;
        for (int iz = iz0; iz <= iz1; ++iz) {
            const double cz = cfg.roi.z_min + (iz + 0.5) * cell;
            for (int ix = ix0; ix <= ix1; ++ix) {
                const double cx = cfg.roi.x_min + (ix + 0.5) * cell;
                double t = 0.0;
                if (len2 > 0.0) t = std::clamp(((cx - ax) * dx + (cz - az) * dz) / len2, 0.0, 1.0);
                const double px = ax + t * dx, pz = az + t * dz;
                const double d2 = (cx - px) * (cx - px) + (cz - pz) * (cz - pz);
                if (d2 <= hw * hw) raster.set(iz, ix);
            }
        }
    }
    return raster;
}

/// Top-view IoU of two lanes over the ROI raster.
inline double topview_iou(const Lane3D& pred, const Lane3D& gt, const MatchConfig& cfg) {
    const TopviewRaster a = rasterize_topview(pred, cfg);
    const TopviewRaster b = rasterize_topview(gt, cfg);
    if (a.count() == 0) throw OutsideROI("predicted lane has no cells inside the ROI");
    if (b.count() == 0) throw OutsideROI("ground-truth lane has no cells inside the ROI");
    return TopviewRaster::iou(a, b);
}

/// Number of equal-distance samples drawn from a ground-truth lane.
inline std::size_t cd_sample_count(double length, const MatchConfig& cfg) {
    const auto by_step = static_cast<std::size_t>(std::ceil(length / cfg.sample_step)) + 1;
    return std::max<std::size_t>(static_cast<std::size_t>(cfg.min_samples), by_step);
}

/// Unilateral chamfer distance: mean distance from equally spaced samples of
/// the ground-truth lane to their nearest points on the predicted polyline
/// (continuous over segments).
inline double unilateral_cd(const Lane3D& pred, const Lane3D& gt, const MatchConfig& cfg) {
    const double length = polyline_length(gt.points);
    if (length < cfg.sample_step)
        throw DegenerateLane("ground-truth lane shorter than the sampling step");
    // Identical polylines have zero chamfer distance by definition; the exact
    // zero matters for self-evaluation reports.
    if (pred.points == gt.points) return 0.0;
    const std::size_t m = cd_sample_count(length, cfg);
    const std::vector<Point3> samples = resample_polyline_count(gt.points, m);
    double sum = 0.0;
    for (const Point3& s : samples) sum += point_polyline_distance(s, pred.points);
    return sum / static_cast<double>(m);
}

struct LaneMatch {
    int pred_index = -1;
    int gt_index = -1;
    double iou = 0.0;
    double cd = 0.0;
};

struct FrameMatchResult {
    std::vector<LaneMatch> matches;   // true positives only
    std::vector<int> fp_pred_indices;
    std::vector<int> fn_gt_indices;
};

/// Two-stage matching for one frame: IoU pre-matching in the top view, then
/// unilateral chamfer verification. Candidate pairs with iou > threshold are
/// assigned greedily one-to-one in descending IoU order; an assigned pair is
/// a true positive iff its chamfer distance is within tau_cd.
inline FrameMatchResult match_frame(std::span<const Lane3D> preds, std::span<const Lane3D> gts,
                                    const MatchConfig& cfg) {
    cfg.validate();
    FrameMatchResult result;
    std::vector<TopviewRaster> pred_rasters, gt_rasters;
    pred_rasters.reserve(preds.size());
    gt_rasters.reserve(gts.size());
    std::vector<std::size_t> pred_counts(preds.size()), gt_counts(gts.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
        pred_rasters.push_back(rasterize_topview(preds[i], cfg));
        pred_counts[i] = pred_rasters.back().count();
    }
    for (std::size_t j = 0; j < gts.size(); ++j) {
        gt_rasters.push_back(rasterize_topview(gts[j], cfg));
        gt_counts[j] = gt_rasters.back().count();
    }

    std::vector<char> gt_measurable(gts.size(), 1);
    for (std::size_t j = 0; j < gts.size(); ++j)
        if (polyline_length(gts[j].points) < cfg.sample_step) gt_measurable[j] = 0;

    std::vector<LaneMatch> candidates;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (pred_counts[i] == 0) continue;  // entirely outside the ROI: cannot match
        for (std::size_t j = 0; j < gts.size(); ++j) {
            if (gt_counts[j] == 0) continue;
            if (!gt_measurable[j]) continue;  // shorter than the sampling step: stays unmatched
            const double iou = TopviewRaster::iou(pred_rasters[i], gt_rasters[j]);
            if (iou > cfg.iou_threshold) {
                LaneMatch m;
                m.pred_index = static_cast<int>(i);
                m.gt_index = static_cast<int>(j);
                m.iou = iou;
                m.cd = unilateral_cd(preds[i], gts[j], cfg);
                candidates.push_back(m);
            }
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const LaneMatch& a, const LaneMatch& b) {
        if (a.iou != b.iou) return a.iou > b.iou;
        if (a.cd != b.cd) return a.cd < b.cd;
        if (a.pred_index != b.pred_index) return a.pred_index < b.pred_index;
        return a.gt_index < b.gt_index;
    });

    std::vector<char> pred_used(preds.size(), 0), gt_used(gts.size(), 0);
    for (const LaneMatch& c : candidates) {
        if (pred_used[c.pred_index] || gt_used[c.gt_index]) continue;
        pred_used[c.pred_index] = 1;
        gt_used[c.gt_index] = 1;
        if (c.cd <= cfg.tau_cd) {
            result.matches.push_back(c);
        } else {
            result.fp_pred_indices.push_back(c.pred_index);
            result.fn_gt_indices.push_back(c.gt_index);
        }
    }
    for (std::size_t i = 0; i < preds.size(); ++i)
        if (!pred_used[i]) result.fp_pred_indices.push_back(static_cast<int>(i));
    for (std::size_t j = 0; j < gts.size(); ++j)
        if (!gt_used[j]) result.fn_gt_indices.push_back(static_cast<int>(j));
    std::sort(result.fp_pred_indices.begin(), result.fp_pred_indices.end());
    std::sort(result.fn_gt_indices.begin(), result.fn_gt_indices.end());
    return result;
}

struct EvalResult {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double cd_error = 0.0;  // mean unilateral CD over true-positive matches
};

/// Order-independent accumulator over frames; counts and the CD sum are
/// associative and commutative, the final division is fixed-order.
class EvalAccumulator {
public:
    void add(const FrameMatchResult& frame) {
        tp_ += frame.matches.size();
        fp_ += frame.fp_pred_indices.size();
        fn_ += frame.fn_gt_indices.size();
        for (const LaneMatch& m : frame.matches) cd_sum_ += m.cd;
    }

    void add_frame(std::span<const Lane3D> preds, std::span<const Lane3D> gts, const MatchConfig& cfg) {
        add(match_frame(preds, gts, cfg));
    }

    void merge(const EvalAccumulator& other) {
        tp_ += other.tp_;
        fp_ += other.fp_;
        fn_ += other.fn_;
        cd_sum_ += other.cd_sum_;
    }

    EvalResult result() const {
        EvalResult r;
        r.tp = tp_;
        r.fp = fp_;
        r.fn = fn_;
        r.precision = (tp_ + fp_) == 0 ? 0.0 : static_cast<double>(tp_) / static_cast<double>(tp_ + fp_);
        r.recall = (tp_ + fn_) == 0 ? 0.0 : static_cast<double>(tp_) / static_cast<double>(tp_ + fn_);
        r.f1 = (r.precision + r.recall) == 0.0 ? 0.0 : 2.0 * r.precision * r.recall / (r.precision + r.recall);
        r.cd_error = tp_ == 0 ? 0.0 : cd_sum_ / static_cast<double>(tp_);
        return r;
    }

private:
    std::size_t tp_ = 0, fp_ = 0, fn_ = 0;
    double cd_sum_ = 0.0;
};

struct FrameLanes {
    std::vector<Lane3D> preds;
    std::vector<Lane3D> gts;
};

inline EvalResult evaluate_dataset(std::span<const FrameLanes> frames, const MatchConfig& cfg) {
    EvalAccumulator acc;
    for (const FrameLanes& f : frames) acc.add_frame(f.preds, f.gts, cfg);
    return acc.result();
}

}  // namespace lane3d
