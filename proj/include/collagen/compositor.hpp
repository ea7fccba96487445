#pragma once

#include <cstdint>
#include <span>
#include <string_view>

#include "collagen/asset_store.hpp"
#include "collagen/image.hpp"
#include "collagen/layout.hpp"

namespace collagen {

/// out = round(alpha * fg + (1 - alpha) * bg) per channel, half away from zero.
Rgb8 blend_pixel(Rgb8 fg, Rgb8 bg, double alpha);

/// Integer form of the same rule with alpha = a / 255. Exact: a / 255
/// fractions never land on a rounding tie.
inline std::uint8_t blend_channel(std::uint8_t fg, std::uint8_t bg, std::uint8_t a) {
    return static_cast<std::uint8_t>((a * fg + (255 - a) * bg + 127) / 255);
}

/// Bilinear resampling with premultiplied alpha, pixel-center aligned.
RgbaImage resample_bilinear(const RgbaImage& src, Extent size);

/// Scales `src` to cover `out` (aspect preserved) and crops the window at
/// `crop` in scaled coordinates. Bilinear.
RgbImage resample_cover(const RgbImage& src, Extent out, PixelPoint crop);
/// Size of `src` after the cover scaling used by resample_cover.
Extent cover_extent(Extent src, Extent out);

/// Alpha-over of `sprite` at `at` (sprite extent must equal the rect).
/// When `coverage` is given (canvas-sized), the sprite alpha is written
/// into it inside the rect.
void composite_sprite(Canvas& canvas, const RgbaImage& sprite, PixelRect at, Matte* coverage = nullptr);

/// Same with a solid color and a coverage sprite.
void composite_color(Canvas& canvas, Rgb8 color, const Matte& sprite, PixelRect at, Matte* coverage = nullptr);

/// Pastes every placement's foreground over `background` in ascending
/// z_order (stable for ties). Throws LayoutError("placement out of bounds")
/// when a scaled rectangle leaves the canvas.
Canvas compose_collage(Canvas background, std::span<const Placement> placements, const AssetStore& store);

/// Each color channel -> clamp(round(channel * factor), 0, 255); alpha
/// untouched. factor must lie in [0.5, 2.0].
RgbImage adjust_brightness(const RgbImage& region, double factor);
RgbaImage adjust_brightness(const RgbaImage& region, double factor);

enum class ShapeKind { circle, square, triangle, star };

std::string_view to_string(ShapeKind shape);
ShapeKind shape_kind_from_string(std::string_view text);

/// Rectangle of extent `size` centred on `center` (integer halving).
PixelRect centered_rect(PixelPoint center, Extent size);

/// size x size anti-aliased coverage (4x4 supersampling).
Matte rasterize_shape(ShapeKind shape, int size);

/// Draws the shape; pixels outside its bounding box are untouched.
/// size 0 leaves the canvas unchanged.
Canvas render_shape(Canvas canvas, ShapeKind shape, Rgb8 color, PixelPoint center, int size);

/// Characters accepted by render_text.
bool is_text_glyph(char c);
/// Extent of a rendered string: cells are 5x7 units plus one unit of
/// spacing, with glyph_height = 7 units.
Extent text_extent(std::size_t length, int glyph_height);

/// Anti-aliased coverage of a string. `labels` enables the punctuation
/// glyphs used for preview captions; otherwise only [A-Za-z0-9] is allowed.
Matte rasterize_text(std::string_view text, int glyph_height, bool labels = false);

struct TextRender {
    Canvas canvas;
    Matte matte;  ///< canvas-sized text coverage
};

/// Renders 3-12 characters from [A-Za-z0-9] with the embedded font.
TextRender render_text(Canvas canvas, std::string_view text, Rgb8 color, PixelPoint center, int glyph_height);

enum class AnnotationMode { mask_fill, bbox_outline };

std::string_view to_string(AnnotationMode mode);
AnnotationMode annotation_mode_from_string(std::string_view text);

struct AnnotationStyle {
    AnnotationMode mode = AnnotationMode::mask_fill;
    Rgb8 color{0, 255, 0};
    int outline_thickness = 2;

    friend bool operator==(const AnnotationStyle&, const AnnotationStyle&) = default;
};

/// Support of a matte: alpha > 0.5, i.e. value >= 128.
inline bool in_support(std::uint8_t alpha) { return alpha >= 128; }

/// Tight bounding box of the support, or an empty rect.
PixelRect support_bbox(const Matte& matte);

/// mask_fill paints the support; bbox_outline draws a rectangle of the
/// given thickness on the support's tight bounding box (inside it).
/// Throws Error("empty support") when no alpha exceeds 0.5.
Canvas render_annotation(Canvas canvas, const Matte& matte, const AnnotationStyle& style);

}  // namespace collagen
