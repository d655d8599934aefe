#pragma once

#include <algorithm>
#include <cmath>

#include "lane3d/raster.hpp"
#include "lane3d/types.hpp"

namespace lane3d {

struct LossConfig {
    double lambda = 1.0;  // regression penalty weight

    void validate() const {
        if (lambda < 0.0 || !std::isfinite(lambda)) throw InvalidParams("lambda must be >= 0 and finite");
    }
};

/// Pixel-wise binary cross entropy over the whole map; probabilities are
/// clamped to [eps, 1 - eps] before the logs.
inline double seg_loss(const Grid<double>& prob, const SegmentationMask& gt) {
    if (!prob.same_shape(gt.values)) throw ShapeMismatch("probability/mask shapes differ");
    constexpr double kEps = 1e-7;
    double sum = 0.0;
    const auto& probs = prob.cells();
    const auto& labels = gt.values.cells();
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double p = std::clamp(probs[i], kEps, 1.0 - kEps);
        sum += labels[i] ? std::log(p) : std::log(1.0 - p);
    }
    return -sum / static_cast<double>(probs.size());
}

inline double smooth_l1(double x) {
    const double a = std::abs(x);
    return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

/// Smooth-L1 regression loss over the offset maps, averaged over the valid
/// pixels and the three channels.
inline double reg_loss(const OffsetMaps& pred, const OffsetMaps& gt, const SegmentationMask& valid) {
    pred.validate();
    gt.validate();
    if (!pred.delta_u.same_shape(gt.delta_u) || !pred.delta_u.same_shape(valid.values))
        throw ShapeMismatch("offset/mask shapes differ");
    double sum = 0.0;
    std::size_t count = 0;
    const int h = pred.height(), w = pred.width();
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (!valid.foreground(r, c)) continue;
            sum += smooth_l1(pred.delta_u.at(r, c) - gt.delta_u.at(r, c));
            sum += smooth_l1(pred.delta_v.at(r, c) - gt.delta_v.at(r, c));
            sum += smooth_l1(pred.delta_z.at(r, c) - gt.delta_z.at(r, c));
            ++count;
        }
    }
    if (count == 0) throw NoValidPixels();
    return sum / (3.0 * static_cast<double>(count));
}

/// L = L_seg + lambda * L_reg.
inline double total_loss(double seg, double reg, const LossConfig& cfg = {}) {
    cfg.validate();
    return seg + cfg.lambda * reg;
}

}  // namespace lane3d
