#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "collagen/image.hpp"
#include "collagen/rng.hpp"

namespace collagen {

/// One resolution bucket. Bins from make_bins() carry index 0..30; custom
/// bins (fixed test canvases, CLI overrides) carry index -1.
struct AspectBin {
    int index = -1;
    double aspect = 1.0;  ///< width / height
    int width = 512;
    int height = 512;

    Extent extent() const { return {width, height}; }
    static AspectBin custom(int width, int height);

    friend bool operator==(const AspectBin&, const AspectBin&) = default;
};

inline constexpr int kBinCount = 31;
inline constexpr int kBinArea = 512 * 512;

/// Nearest multiple of 16; ties resolve upward.
int round_to_16(double value);

/// The 31 log-uniform aspect bins from 4:1 down to 1:4 at a 512x512 area
/// budget: aspect_k = 4^(1 - k/15).
std::vector<AspectBin> make_bins();

struct VideoShape {
    int frame_count = 81;
    int width = 416;
    int height = 416;

    Extent extent() const { return {width, height}; }

    friend bool operator==(const VideoShape&, const VideoShape&) = default;
};

/// How the published resolution list ("320x544", ...) is read.
enum class ResolutionOrder { height_by_width, width_by_height };

std::span<const int> video_frame_counts();
/// (width, height) pairs under the given reading of the list.
std::vector<Extent> video_resolutions(ResolutionOrder order = ResolutionOrder::height_by_width);

VideoShape sample_video_shape(Rng& rng, ResolutionOrder order = ResolutionOrder::height_by_width);

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

/// Position and size of one pasted foreground.
struct Placement {
    std::string asset_id;
    Point2 center;
    double scale = 1.0;  ///< relative to the asset's native size, in (0, 8]
    int z_order = 0;

    friend bool operator==(const Placement&, const Placement&) = default;
};

/// Scaled length of a native dimension; never below one pixel.
int scaled_length(int native, double scale);

/// The integer rectangle a placement rasterizes into.
PixelRect placement_rect(const Placement& placement, Extent native);

/// Intersection over union of two rectangles (0 when either is empty).
double iou(const PixelRect& a, const PixelRect& b);

struct PlacementConstraints {
    double min_fraction = 0.2;  ///< longer scaled side / min(canvas side)
    double max_fraction = 0.6;
    double max_overlap = 0.3;   ///< pairwise bounding-box IoU bound
    int retry_cap = 200;        ///< attempts per object
};

struct PlacementRequest {
    std::string asset_id;
    Extent native;
};

/// Samples scale and position for each requested object, in order, by
/// rejection against previously accepted rectangles. Placement i gets
/// z_order i. Throws LayoutError when an object exceeds the retry cap.
std::vector<Placement> sample_placements(Rng& rng, Extent canvas,
                                         std::span<const PlacementRequest> objects,
                                         const PlacementConstraints& constraints = {});

/// Positions fixed-size rectangles uniformly (top-left uniform over the
/// positions that keep the rectangle inside the canvas) subject to the IoU
/// bound against `occupied` and each other.
std::vector<PixelRect> sample_rects(Rng& rng, Extent canvas, std::span<const Extent> sizes,
                                    double max_overlap, int retry_cap,
                                    std::span<const PixelRect> occupied = {});

}  // namespace collagen
