#include "collagen/compositor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "font5x7.hpp"

namespace collagen {

namespace {

constexpr int kSuper = 4;  // supersampling grid per axis
constexpr int kSamples = kSuper * kSuper;

std::uint8_t coverage_value(int hits) {
    return static_cast<std::uint8_t>((hits * 255 + kSamples / 2) / kSamples);
}

std::uint8_t round_channel(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
}

struct Tap {
    int i0;
    int i1;
    double f;
};

Tap bilinear_tap(int out_index, int src_len, int out_len, double scale_override = 0.0, int offset = 0) {
    const double scale = scale_override > 0.0 ? scale_override : static_cast<double>(out_len) / src_len;
    double s = (out_index + offset + 0.5) / scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src_len - 1));
    const int i0 = static_cast<int>(std::floor(s));
    const int i1 = std::min(i0 + 1, src_len - 1);
    return {i0, i1, s - i0};
}

}  // namespace

Rgb8 blend_pixel(Rgb8 fg, Rgb8 bg, double alpha) {
    alpha = std::clamp(alpha, 0.0, 1.0);
    auto mix = [alpha](std::uint8_t f, std::uint8_t b) {
        return round_channel(alpha * f + (1.0 - alpha) * b);
    };
    return {mix(fg.r, bg.r), mix(fg.g, bg.g), mix(fg.b, bg.b)};
}

RgbaImage resample_bilinear(const RgbaImage& src, Extent size) {
    if (src.empty() || size.width <= 0 || size.height <= 0) throw Error("resample of empty image");
    if (src.extent() == size) return src;

    std::vector<Tap> xs(static_cast<std::size_t>(size.width));
    for (int x = 0; x < size.width; ++x) xs[x] = bilinear_tap(x, src.width(), size.width);

    RgbaImage out(size.width, size.height);
    for (int y = 0; y < size.height; ++y) {
        const Tap ty = bilinear_tap(y, src.height(), size.height);
        const auto r0 = src.row(ty.i0);
        const auto r1 = src.row(ty.i1);
        auto dst = out.row(y);
        for (int x = 0; x < size.width; ++x) {
            const Tap& tx = xs[x];
            const std::array<const Rgba8*, 4> px{&r0[tx.i0], &r0[tx.i1], &r1[tx.i0], &r1[tx.i1]};
            const std::array<double, 4> w{(1 - tx.f) * (1 - ty.f), tx.f * (1 - ty.f), (1 - tx.f) * ty.f,
                                          tx.f * ty.f};
            double a = 0, r = 0, g = 0, b = 0;
            for (int k = 0; k < 4; ++k) {
                const double wa = w[k] * px[k]->a;
                a += wa;
                r += wa * px[k]->r;
                g += wa * px[k]->g;
                b += wa * px[k]->b;
            }
            if (a > 0.0) {
                dst[x] = {round_channel(r / a), round_channel(g / a), round_channel(b / a), round_channel(a)};
            } else {
                dst[x] = {0, 0, 0, 0};
            }
        }
    }
    return out;
}

Extent cover_extent(Extent src, Extent out) {
    const double scale = std::max(static_cast<double>(out.width) / src.width,
                                  static_cast<double>(out.height) / src.height);
    return {std::max(out.width, static_cast<int>(std::floor(src.width * scale + 1e-9))),
            std::max(out.height, static_cast<int>(std::floor(src.height * scale + 1e-9)))};
}

RgbImage resample_cover(const RgbImage& src, Extent out, PixelPoint crop) {
    if (src.empty() || out.width <= 0 || out.height <= 0) throw Error("resample of empty image");
    const Extent cover = cover_extent(src.extent(), out);
    if (crop.x < 0 || crop.y < 0 || crop.x + out.width > cover.width || crop.y + out.height > cover.height) {
        throw Error("crop window outside the scaled image");
    }
    const double scale = std::max(static_cast<double>(out.width) / src.width(),
                                  static_cast<double>(out.height) / src.height());
    std::vector<Tap> xs(static_cast<std::size_t>(out.width));
    for (int x = 0; x < out.width; ++x) xs[x] = bilinear_tap(x, src.width(), out.width, scale, crop.x);

    RgbImage dst(out.width, out.height);
    for (int y = 0; y < out.height; ++y) {
        const Tap ty = bilinear_tap(y, src.height(), out.height, scale, crop.y);
        const auto r0 = src.row(ty.i0);
        const auto r1 = src.row(ty.i1);
        auto row = dst.row(y);
        for (int x = 0; x < out.width; ++x) {
            const Tap& tx = xs[x];
            auto lerp = [&](auto member) {
                const double top = (1 - tx.f) * (r0[tx.i0].*member) + tx.f * (r0[tx.i1].*member);
                const double bot = (1 - tx.f) * (r1[tx.i0].*member) + tx.f * (r1[tx.i1].*member);
                return round_channel((1 - ty.f) * top + ty.f * bot);
            };
            row[x] = {lerp(&Rgb8::r), lerp(&Rgb8::g), lerp(&Rgb8::b)};
        }
    }
    return dst;
}

void composite_sprite(Canvas& canvas, const RgbaImage& sprite, PixelRect at, Matte* coverage) {
    if (!at.inside(canvas.extent())) throw LayoutError("placement out of bounds");
    if (sprite.extent() != Extent{at.width, at.height}) throw Error("sprite does not match its rectangle");
    for (int y = 0; y < at.height; ++y) {
        const auto src = sprite.row(y);
        for (int x = 0; x < at.width; ++x) {
            const Rgba8 fg = src[x];
            if (coverage) (*coverage)(at.x + x, at.y + y) = fg.a;
            if (fg.a == 0) continue;
            Rgb8& bg = canvas(at.x + x, at.y + y);
            bg = {blend_channel(fg.r, bg.r, fg.a), blend_channel(fg.g, bg.g, fg.a), blend_channel(fg.b, bg.b, fg.a)};
        }
    }
}

void composite_color(Canvas& canvas, Rgb8 color, const Matte& sprite, PixelRect at, Matte* coverage) {
    if (!at.inside(canvas.extent())) throw LayoutError("placement out of bounds");
    if (sprite.extent() != Extent{at.width, at.height}) throw Error("sprite does not match its rectangle");
    for (int y = 0; y < at.height; ++y) {
        const auto src = sprite.row(y);
        for (int x = 0; x < at.width; ++x) {
            const std::uint8_t a = src[x];
            if (coverage) (*coverage)(at.x + x, at.y + y) = a;
            if (a == 0) continue;
            Rgb8& bg = canvas(at.x + x, at.y + y);
            bg = {blend_channel(color.r, bg.r, a), blend_channel(color.g, bg.g, a), blend_channel(color.b, bg.b, a)};
        }
    }
}

Canvas compose_collage(Canvas background, std::span<const Placement> placements, const AssetStore& store) {
    std::vector<const Placement*> order;
    for (const auto& p : placements) order.push_back(&p);
    std::stable_sort(order.begin(), order.end(),
                     [](const Placement* a, const Placement* b) { return a->z_order < b->z_order; });
    for (const Placement* p : order) {
        if (!(p->scale > 0.0) || p->scale > 8.0) throw Error("placement scale outside (0, 8]");
        const auto fg = store.foreground(p->asset_id);
        const auto rect = placement_rect(*p, fg->pixels.extent());
        if (!rect.inside(background.extent())) throw LayoutError("placement out of bounds");
        composite_sprite(background, resample_bilinear(fg->pixels, {rect.width, rect.height}), rect);
    }
    return background;
}

namespace {

void check_brightness(double factor) {
    if (!(factor >= 0.5 && factor <= 2.0)) throw Error("brightness factor outside [0.5, 2.0]");
}

std::uint8_t scale_channel(std::uint8_t v, double factor) {
    // Positive operands: std::lround rounds half away from zero.
    return static_cast<std::uint8_t>(std::min<long>(255, std::lround(v * factor)));
}

}  // namespace

RgbImage adjust_brightness(const RgbImage& region, double factor) {
    check_brightness(factor);
    RgbImage out = region;
    for (auto& px : out.pixels()) {
        px = {scale_channel(px.r, factor), scale_channel(px.g, factor), scale_channel(px.b, factor)};
    }
    return out;
}

RgbaImage adjust_brightness(const RgbaImage& region, double factor) {
    check_brightness(factor);
    RgbaImage out = region;
    for (auto& px : out.pixels()) {
        px = {scale_channel(px.r, factor), scale_channel(px.g, factor), scale_channel(px.b, factor), px.a};
    }
    return out;
}

std::string_view to_string(ShapeKind shape) {
    switch (shape) {
        case ShapeKind::circle: return "circle";
        case ShapeKind::square: return "square";
        case ShapeKind::triangle: return "triangle";
        case ShapeKind::star: return "star";
    }
    return "?";
}

ShapeKind shape_kind_from_string(std::string_view text) {
    if (text == "circle") return ShapeKind::circle;
    if (text == "square") return ShapeKind::square;
    if (text == "triangle") return ShapeKind::triangle;
    if (text == "star") return ShapeKind::star;
    throw Error("unknown shape '" + std::string(text) + "'");
}

PixelRect centered_rect(PixelPoint center, Extent size) {
    return {center.x - size.width / 2, center.y - size.height / 2, size.width, size.height};
}

namespace {

struct Vec2 {
    double x;
    double y;
};

bool inside_polygon(std::span<const Vec2> poly, Vec2 p) {
    bool in = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const auto& a = poly[i];
        const auto& b = poly[j];
        if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) in = !in;
    }
    return in;
}

std::vector<Vec2> star_polygon() {
    std::vector<Vec2> poly;
    for (int k = 0; k < 10; ++k) {
        const double r = (k % 2 == 0) ? 0.5 : 0.2;
        const double theta = -std::numbers::pi / 2 + k * std::numbers::pi / 5;
        poly.push_back({0.5 + r * std::cos(theta), 0.5 + r * std::sin(theta)});
    }
    return poly;
}

}  // namespace

Matte rasterize_shape(ShapeKind shape, int size) {
    if (size < 0) throw Error("negative shape size");
    Matte out(size, size);
    if (size == 0) return out;
    static const std::vector<Vec2> star = star_polygon();
    static const std::array<Vec2, 3> triangle{{{0.5, 0.0}, {1.0, 1.0}, {0.0, 1.0}}};

    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            int hits = 0;
            for (int j = 0; j < kSuper; ++j) {
                for (int i = 0; i < kSuper; ++i) {
                    const Vec2 p{(x + (i + 0.5) / kSuper) / size, (y + (j + 0.5) / kSuper) / size};
                    bool in = false;
                    switch (shape) {
                        case ShapeKind::square: in = true; break;
                        case ShapeKind::circle:
                            in = (p.x - 0.5) * (p.x - 0.5) + (p.y - 0.5) * (p.y - 0.5) <= 0.25;
                            break;
                        case ShapeKind::triangle: in = inside_polygon(triangle, p); break;
                        case ShapeKind::star: in = inside_polygon(star, p); break;
                    }
                    hits += in ? 1 : 0;
                }
            }
            out(x, y) = coverage_value(hits);
        }
    }
    return out;
}

Canvas render_shape(Canvas canvas, ShapeKind shape, Rgb8 color, PixelPoint center, int size) {
    if (size < 0) throw Error("negative shape size");
    if (size == 0) return canvas;
    const auto rect = centered_rect(center, {size, size});
    if (!rect.inside(canvas.extent())) throw LayoutError("shape out of bounds");
    composite_color(canvas, color, rasterize_shape(shape, size), rect);
    return canvas;
}

bool is_text_glyph(char c) { return detail::alnum_glyph(c).has_value(); }

Extent text_extent(std::size_t length, int glyph_height) {
    if (length == 0) return {0, glyph_height};
    const double unit = glyph_height / 7.0;
    return {static_cast<int>(std::lround((6.0 * static_cast<double>(length) - 1.0) * unit)), glyph_height};
}

Matte rasterize_text(std::string_view text, int glyph_height, bool labels) {
    if (glyph_height < 7) throw Error("glyph height below 7 pixels");
    std::vector<detail::Glyph> glyphs;
    for (char c : text) {
        auto g = labels ? detail::label_glyph(c) : detail::alnum_glyph(c);
        if (!g && labels) g = detail::label_glyph('?');
        if (!g) throw Error(std::string("non-renderable character '") + c + "'");
        glyphs.push_back(*g);
    }
    const Extent ext = text_extent(glyphs.size(), glyph_height);
    Matte out(ext.width, ext.height);
    const double unit = glyph_height / 7.0;
    const int n = static_cast<int>(glyphs.size());
    for (int y = 0; y < ext.height; ++y) {
        for (int x = 0; x < ext.width; ++x) {
            int hits = 0;
            for (int j = 0; j < kSuper; ++j) {
                const int row = static_cast<int>(std::floor((y + (j + 0.5) / kSuper) / unit));
                if (row < 0 || row >= 7) continue;
                for (int i = 0; i < kSuper; ++i) {
                    const int cell = static_cast<int>(std::floor((x + (i + 0.5) / kSuper) / unit));
                    const int glyph = cell / 6;
                    const int col = cell % 6;
                    if (glyph >= n || col >= 5) continue;
                    if ((glyphs[glyph][row] >> (4 - col)) & 1) ++hits;
                }
            }
            out(x, y) = coverage_value(hits);
        }
    }
    return out;
}

TextRender render_text(Canvas canvas, std::string_view text, Rgb8 color, PixelPoint center, int glyph_height) {
    if (text.size() < 3 || text.size() > 12) throw Error("text must be 3-12 characters");
    for (char c : text) {
        if (!is_text_glyph(c)) throw Error(std::string("non-renderable character '") + c + "'");
    }
    const Matte sprite = rasterize_text(text, glyph_height);
    const auto rect = centered_rect(center, sprite.extent());
    if (!rect.inside(canvas.extent())) throw LayoutError("text out of bounds");
    Matte matte(canvas.width(), canvas.height());
    composite_color(canvas, color, sprite, rect, &matte);
    return {std::move(canvas), std::move(matte)};
}

std::string_view to_string(AnnotationMode mode) {
    return mode == AnnotationMode::mask_fill ? "mask_fill" : "bbox_outline";
}

AnnotationMode annotation_mode_from_string(std::string_view text) {
    if (text == "mask_fill") return AnnotationMode::mask_fill;
    if (text == "bbox_outline") return AnnotationMode::bbox_outline;
    throw Error("unknown annotation mode '" + std::string(text) + "'");
}

PixelRect support_bbox(const Matte& matte) {
    int x0 = matte.width(), y0 = matte.height(), x1 = -1, y1 = -1;
    for (int y = 0; y < matte.height(); ++y) {
        const auto row = matte.row(y);
        for (int x = 0; x < matte.width(); ++x) {
            if (!in_support(row[x])) continue;
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, y);
            y1 = std::max(y1, y);
        }
    }
    if (x1 < 0) return {};
    return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

Canvas render_annotation(Canvas canvas, const Matte& matte, const AnnotationStyle& style) {
    if (matte.extent() != canvas.extent()) throw Error("matte and canvas dimensions differ");
    if (style.outline_thickness < 1) throw Error("outline thickness must be at least 1");
    const auto box = support_bbox(matte);
    if (box.empty()) throw Error("empty support");

    if (style.mode == AnnotationMode::mask_fill) {
        for (int y = box.y; y < box.bottom(); ++y) {
            for (int x = box.x; x < box.right(); ++x) {
                if (in_support(matte(x, y))) canvas(x, y) = style.color;
            }
        }
        return canvas;
    }
    const int t = style.outline_thickness;
    for (int y = box.y; y < box.bottom(); ++y) {
        for (int x = box.x; x < box.right(); ++x) {
            const bool edge = x < box.x + t || x >= box.right() - t || y < box.y + t || y >= box.bottom() - t;
            if (edge) canvas(x, y) = style.color;
        }
    }
    return canvas;
}

}  // namespace collagen
