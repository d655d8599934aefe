#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "lane3d/camera.hpp"
#include "lane3d/rng.hpp"
#include "lane3d/types.hpp"

namespace lane3d {

struct AugmentParams {
    double crop_top = 0.0;  // pixels removed from the image top (c)
    double scale = 1.0;     // isotropic image scale (s)
    bool flip = false;

    void validate(int image_height) const {
        if (!(scale > 0.0) || !std::isfinite(scale)) throw InvalidParams("scale must be > 0");
        if (crop_top < 0.0 || crop_top >= image_height) throw InvalidParams("crop_top must lie in [0, H)");
    }
};

struct AugmentedFrame {
    std::vector<Lane3D> lanes;
    std::vector<Lane2D> labels2d;
    CameraIntrinsics intrinsics;
    ImageSize image_size;
};

/// Crop c rows from the image top for a scale s so the result returns to
/// target_height rows.
inline double crop_for_target(int image_height, double scale, int target_height) {
    return static_cast<double>(image_height) - static_cast<double>(target_height) / scale;
}

namespace detail {

inline void check_label_consistency(std::span<const Lane3D> lanes, std::span<const Lane2D> labels2d,
                                    const CameraIntrinsics& k) {
    if (labels2d.empty() || lanes.empty()) return;
    if (labels2d.size() != lanes.size())
        throw InvalidParams("2D and 3D label lists must pair up");
    for (std::size_t i = 0; i < lanes.size(); ++i) {
        if (labels2d[i].points.size() != lanes[i].points.size())
            throw InvalidParams("2D and 3D labels of lane " + std::to_string(i) + " must pair up");
        for (std::size_t j = 0; j < lanes[i].points.size(); ++j) {
            const Pixel px = project(lanes[i].points[j], k);
            if (distance(px, labels2d[i].points[j]) > 0.5)
                throw InvalidParams("2D labels disagree with the projected 3D labels (> 0.5 px)");
        }
    }
}

}  // namespace detail

/// Horizontal mirror of a frame: u -> W-1-u, x -> -x, cx -> W-1-cx and the
/// skew changes sign, which keeps project(flipped 3D) == flipped 2D exactly.
inline AugmentedFrame flip_frame(std::span<const Lane3D> lanes, std::span<const Lane2D> labels2d,
                                 const CameraIntrinsics& k, ImageSize size) {
    k.validate();
    AugmentedFrame out;
    out.image_size = size;
    out.intrinsics = k;
    out.intrinsics.cx = (size.width - 1) - k.cx;
    out.intrinsics.skew = -k.skew;
    for (const Lane3D& lane : lanes) {
        Lane3D flipped = lane;
        for (Point3& p : flipped.points) p.x = -p.x;
        out.lanes.push_back(std::move(flipped));
    }
    for (const Lane2D& label : labels2d) {
        Lane2D flipped = label;
        for (Pixel& p : flipped.points) p.u = (size.width - 1) - p.u;
        out.labels2d.push_back(std::move(flipped));
    }
    return out;
}

/// Joint 3D-consistent crop-scale (and optional flip): the image is cropped
/// by c rows at the top and scaled by s, 2D labels map as
/// (u, v) -> (u s, (v - c) s), and 3D labels keep x, y while z scales to z s.
/// The adjusted intrinsics are the unique choice under which projecting the
/// transformed 3D labels reproduces the transformed 2D labels:
///   fx' = s^2 fx, fy' = s^2 fy, skew' = s^2 skew,
///   cx' = s cx,   cy' = s (cy - c).
inline AugmentedFrame augment_frame(std::span<const Lane3D> lanes, std::span<const Lane2D> labels2d,
                                    const CameraIntrinsics& k, ImageSize size, const AugmentParams& params) {
    k.validate();
    params.validate(size.height);
    detail::check_label_consistency(lanes, labels2d, k);

    AugmentedFrame frame;
    if (params.flip) {
        frame = flip_frame(lanes, labels2d, k, size);
    } else {
        frame.lanes.assign(lanes.begin(), lanes.end());
        frame.labels2d.assign(labels2d.begin(), labels2d.end());
        frame.intrinsics = k;
        frame.image_size = size;
    }
    if (params.scale == 1.0 && params.crop_top == 0.0) return frame;

    const double s = params.scale;
    const double c = params.crop_top;
    for (Lane3D& lane : frame.lanes)
        for (Point3& p : lane.points) p.z *= s;
    for (Lane2D& label : frame.labels2d)
        for (Pixel& p : label.points) {
            p.u *= s;
            p.v = (p.v - c) * s;
        }
    frame.intrinsics.fx *= s * s;
    frame.intrinsics.fy *= s * s;
    frame.intrinsics.skew *= s * s;
    frame.intrinsics.cx *= s;
    frame.intrinsics.cy = (frame.intrinsics.cy - c) * s;
    frame.image_size.width = static_cast<int>(std::lround(size.width * s));
    frame.image_size.height = static_cast<int>(std::lround((size.height - c) * s));
    return frame;
}

/// Random parameters for training-style augmentation: s drawn from
/// [scale_min, scale_max], the crop chosen so the scaled image lands on
/// target_height rows, plus a fair coin for the flip.
inline AugmentParams random_augment_params(Rng& rng, int image_height, double scale_min = 0.8,
                                           double scale_max = 1.2, int target_height = 320) {
    AugmentParams p;
    p.scale = rng.uniform(scale_min, scale_max);
    p.crop_top = std::max(0.0, crop_for_target(image_height, p.scale, target_height));
    p.flip = rng.uniform() < 0.5;
    return p;
}

}  // namespace lane3d
