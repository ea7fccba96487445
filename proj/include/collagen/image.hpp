#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "collagen/error.hpp"

namespace collagen {

struct Rgb8 {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;

    friend bool operator==(const Rgb8&, const Rgb8&) = default;
};

struct Rgba8 {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;
    std::uint8_t a = 0;

    friend bool operator==(const Rgba8&, const Rgba8&) = default;
};

struct Extent {
    int width = 0;
    int height = 0;

    friend bool operator==(const Extent&, const Extent&) = default;
};

struct PixelPoint {
    int x = 0;
    int y = 0;

    friend bool operator==(const PixelPoint&, const PixelPoint&) = default;
};

/// Half-open integer rectangle [x, x + width) x [y, y + height).
struct PixelRect {
    int x = 0;
    int y = 0;
    int width = 0;
    int height = 0;

    int right() const { return x + width; }
    int bottom() const { return y + height; }
    long long area() const { return static_cast<long long>(width) * height; }
    bool empty() const { return width <= 0 || height <= 0; }

    bool inside(Extent canvas) const {
        return x >= 0 && y >= 0 && right() <= canvas.width && bottom() <= canvas.height;
    }

    friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

inline PixelRect intersect(const PixelRect& a, const PixelRect& b) {
    const int x0 = std::max(a.x, b.x);
    const int y0 = std::max(a.y, b.y);
    const int x1 = std::min(a.right(), b.right());
    const int y1 = std::min(a.bottom(), b.bottom());
    if (x1 <= x0 || y1 <= y0) return {x0, y0, 0, 0};
    return {x0, y0, x1 - x0, y1 - y0};
}

/// Dense row-major 2-D grid of pixels.
template <typename Pixel>
class Grid {
public:
    Grid() = default;
    Grid(int width, int height, Pixel fill = {})
        : width_(width), height_(height) {
        if (width < 0 || height < 0) throw Error("negative grid dimensions");
        data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
    }

    int width() const { return width_; }
    int height() const { return height_; }
    Extent extent() const { return {width_, height_}; }
    bool empty() const { return data_.empty(); }

    Pixel& operator()(int x, int y) { return data_[index(x, y)]; }
    const Pixel& operator()(int x, int y) const { return data_[index(x, y)]; }

    std::span<Pixel> row(int y) {
        return {data_.data() + static_cast<std::size_t>(y) * width_, static_cast<std::size_t>(width_)};
    }
    std::span<const Pixel> row(int y) const {
        return {data_.data() + static_cast<std::size_t>(y) * width_, static_cast<std::size_t>(width_)};
    }

    std::span<Pixel> pixels() { return data_; }
    std::span<const Pixel> pixels() const { return data_; }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<Pixel> data_;
};

using RgbImage = Grid<Rgb8>;
using RgbaImage = Grid<Rgba8>;
/// 8-bit coverage; alpha = value / 255.
using Matte = Grid<std::uint8_t>;
using LumaImage = Grid<double>;

/// RGB raster whose dimensions are multiples of 16 (latent-stride aligned).
class Canvas {
public:
    Canvas(int width, int height, Rgb8 fill = {}) : pixels_(checked(width, height), height, fill) {}
    explicit Canvas(RgbImage pixels) : pixels_(std::move(pixels)) {
        checked(pixels_.width(), pixels_.height());
    }

    int width() const { return pixels_.width(); }
    int height() const { return pixels_.height(); }
    Extent extent() const { return pixels_.extent(); }

    Rgb8& operator()(int x, int y) { return pixels_(x, y); }
    const Rgb8& operator()(int x, int y) const { return pixels_(x, y); }

    const RgbImage& pixels() const { return pixels_; }
    RgbImage release() && { return std::move(pixels_); }

    friend bool operator==(const Canvas&, const Canvas&) = default;

private:
    static int checked(int width, int height) {
        if (width <= 0 || height <= 0 || width % 16 != 0 || height % 16 != 0) {
            throw Error("canvas dimensions must be positive multiples of 16");
        }
        return width;
    }

    RgbImage pixels_;
};

}  // namespace collagen
