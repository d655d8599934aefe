#pragma once

#include <cstdint>
#include <vector>

#include "lane3d/types.hpp"

namespace lane3d {

/// Dense row-major H x W raster.
template <typename T>
class Grid {
public:
    Grid() = default;
    Grid(int width, int height, T fill = T{})
        : width_(width), height_(height), cells_(static_cast<std::size_t>(width) * height, fill) {
        if (width <= 0 || height <= 0) throw InvalidParams("grid dimensions must be positive");
    }

    int width() const { return width_; }
    int height() const { return height_; }
    bool contains(int row, int col) const { return row >= 0 && row < height_ && col >= 0 && col < width_; }

    T& at(int row, int col) { return cells_[static_cast<std::size_t>(row) * width_ + col]; }
    const T& at(int row, int col) const { return cells_[static_cast<std::size_t>(row) * width_ + col]; }

    std::vector<T>& cells() { return cells_; }
    const std::vector<T>& cells() const { return cells_; }

    bool same_shape(int width, int height) const { return width_ == width && height_ == height; }

    template <typename U>
    bool same_shape(const Grid<U>& other) const {
        return width_ == other.width() && height_ == other.height();
    }

    bool operator==(const Grid& other) const {
        return width_ == other.width_ && height_ == other.height_ && cells_ == other.cells_;
    }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<T> cells_;
};

/// Per-pixel depth in meters; 0 marks a missing value.
struct DepthMap {
    static constexpr double kMissing = 0.0;

    Grid<double> values;

    DepthMap() = default;
    DepthMap(int width, int height) : values(width, height, kMissing) {}

    int width() const { return values.width(); }
    int height() const { return values.height(); }

    bool is_valid(int row, int col) const { return values.at(row, col) != kMissing; }
    double at(int row, int col) const { return values.at(row, col); }

    void set(int row, int col, double depth) {
        if (depth <= 0.0) throw NonPositiveDepth("depth values must be > 0");
        values.at(row, col) = depth;
    }

    std::size_t valid_count() const {
        std::size_t n = 0;
        for (double d : values.cells())
            if (d != kMissing) ++n;
        return n;
    }

    bool operator==(const DepthMap& other) const { return values == other.values; }
};

/// Binary lane mask, foreground = 1.
struct SegmentationMask {
    Grid<std::uint8_t> values;

    SegmentationMask() = default;
    SegmentationMask(int width, int height) : values(width, height, 0) {}

    int width() const { return values.width(); }
    int height() const { return values.height(); }
    bool foreground(int row, int col) const { return values.at(row, col) != 0; }
    void set(int row, int col, bool fg = true) { values.at(row, col) = fg ? 1 : 0; }

    std::size_t foreground_count() const {
        std::size_t n = 0;
        for (std::uint8_t v : values.cells())
            if (v) ++n;
        return n;
    }
};

/// Per-pixel regression maps: pixel offsets (delta_u, delta_v) and the
/// normalized depth residual delta_z.
struct OffsetMaps {
    Grid<double> delta_u;
    Grid<double> delta_v;
    Grid<double> delta_z;

    OffsetMaps() = default;
    OffsetMaps(int width, int height)
        : delta_u(width, height, 0.0), delta_v(width, height, 0.0), delta_z(width, height, 0.0) {}

    int width() const { return delta_u.width(); }
    int height() const { return delta_u.height(); }

    void validate() const {
        if (!delta_u.same_shape(delta_v) || !delta_u.same_shape(delta_z))
            throw ShapeMismatch("offset maps must share dimensions");
    }
};

}  // namespace lane3d
