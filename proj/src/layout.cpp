#include "collagen/layout.hpp"

#include <array>
#include <cmath>

namespace collagen {

AspectBin AspectBin::custom(int width, int height) {
    if (width <= 0 || height <= 0 || width % 16 != 0 || height % 16 != 0) {
        throw Error("custom bin dimensions must be positive multiples of 16");
    }
    return {-1, static_cast<double>(width) / height, width, height};
}

int round_to_16(double value) {
    return static_cast<int>(std::floor(value / 16.0 + 0.5)) * 16;
}

std::vector<AspectBin> make_bins() {
    std::vector<AspectBin> bins;
    bins.reserve(kBinCount);
    for (int k = 0; k < kBinCount; ++k) {
        const double aspect = std::pow(4.0, 1.0 - k / 15.0);
        const double root = std::sqrt(aspect);
        bins.push_back({k, aspect, round_to_16(512.0 * root), round_to_16(512.0 / root)});
    }
    return bins;
}

namespace {
constexpr std::array<int, 4> kFrameCounts{73, 77, 81, 85};
// As printed: 320x544, 384x480, 416x416, 480x384, 544x320.
constexpr std::array<std::pair<int, int>, 5> kListedResolutions{
    {{320, 544}, {384, 480}, {416, 416}, {480, 384}, {544, 320}}};
}  // namespace

std::span<const int> video_frame_counts() { return kFrameCounts; }

std::vector<Extent> video_resolutions(ResolutionOrder order) {
    std::vector<Extent> out;
    for (const auto& [first, second] : kListedResolutions) {
        if (order == ResolutionOrder::height_by_width) {
            out.push_back({second, first});
        } else {
            out.push_back({first, second});
        }
    }
    return out;
}

VideoShape sample_video_shape(Rng& rng, ResolutionOrder order) {
    const auto resolutions = video_resolutions(order);
    const auto combo = rng.below(kFrameCounts.size() * resolutions.size());
    const auto& res = resolutions[combo % resolutions.size()];
    return {kFrameCounts[combo / resolutions.size()], res.width, res.height};
}

int scaled_length(int native, double scale) {
    return std::max(1, static_cast<int>(std::lround(native * scale)));
}

PixelRect placement_rect(const Placement& placement, Extent native) {
    const int w = scaled_length(native.width, placement.scale);
    const int h = scaled_length(native.height, placement.scale);
    return {static_cast<int>(std::lround(placement.center.x - w / 2.0)),
            static_cast<int>(std::lround(placement.center.y - h / 2.0)), w, h};
}

double iou(const PixelRect& a, const PixelRect& b) {
    if (a.empty() || b.empty()) return 0.0;
    const auto overlap = intersect(a, b).area();
    if (overlap == 0) return 0.0;
    return static_cast<double>(overlap) / static_cast<double>(a.area() + b.area() - overlap);
}

namespace {

bool admissible(const PixelRect& rect, std::span<const PixelRect> placed,
                std::span<const PixelRect> occupied, double max_overlap) {
    for (const auto& other : occupied) {
        if (iou(rect, other) > max_overlap) return false;
    }
    for (const auto& other : placed) {
        if (iou(rect, other) > max_overlap) return false;
    }
    return true;
}

PixelRect draw_position(Rng& rng, Extent canvas, Extent size) {
    const int x = rng.range(0, canvas.width - size.width);
    const int y = rng.range(0, canvas.height - size.height);
    return {x, y, size.width, size.height};
}

}  // namespace

std::vector<PixelRect> sample_rects(Rng& rng, Extent canvas, std::span<const Extent> sizes,
                                    double max_overlap, int retry_cap,
                                    std::span<const PixelRect> occupied) {
    std::vector<PixelRect> placed;
    placed.reserve(sizes.size());
    for (const auto& size : sizes) {
        if (size.width <= 0 || size.height <= 0 || size.width > canvas.width ||
            size.height > canvas.height) {
            throw LayoutError("cannot satisfy layout constraints: rectangle larger than canvas");
        }
        bool ok = false;
        for (int attempt = 0; attempt < retry_cap && !ok; ++attempt) {
            const auto rect = draw_position(rng, canvas, size);
            if (admissible(rect, placed, occupied, max_overlap)) {
                placed.push_back(rect);
                ok = true;
            }
        }
        if (!ok) throw LayoutError("cannot satisfy layout constraints");
    }
    return placed;
}

std::vector<Placement> sample_placements(Rng& rng, Extent canvas,
                                         std::span<const PlacementRequest> objects,
                                         const PlacementConstraints& constraints) {
    if (objects.empty() || objects.size() > 6) {
        throw Error("sample_placements requires between 1 and 6 objects");
    }
    if (!(constraints.min_fraction > 0.0) || constraints.max_fraction < constraints.min_fraction) {
        throw Error("invalid placement scale range");
    }
    const int short_side = std::min(canvas.width, canvas.height);

    std::vector<Placement> placements;
    std::vector<PixelRect> placed;
    for (std::size_t i = 0; i < objects.size(); ++i) {
        const auto& obj = objects[i];
        const int longer = std::max(obj.native.width, obj.native.height);
        if (longer <= 0) throw Error("object has empty native extent");
        bool ok = false;
        for (int attempt = 0; attempt < constraints.retry_cap && !ok; ++attempt) {
            const double fraction = rng.uniform(constraints.min_fraction, constraints.max_fraction);
            const double scale = fraction * short_side / longer;
            if (!(scale > 0.0) || scale > 8.0) continue;
            const Extent size{scaled_length(obj.native.width, scale),
                              scaled_length(obj.native.height, scale)};
            if (size.width > canvas.width || size.height > canvas.height) continue;
            const auto rect = draw_position(rng, canvas, size);
            if (!admissible(rect, placed, {}, constraints.max_overlap)) continue;
            placed.push_back(rect);
            placements.push_back({obj.asset_id,
                                  {rect.x + size.width / 2.0, rect.y + size.height / 2.0},
                                  scale,
                                  static_cast<int>(i)});
            ok = true;
        }
        if (!ok) throw LayoutError("cannot satisfy layout constraints");
    }
    return placements;
}

}  // namespace collagen
