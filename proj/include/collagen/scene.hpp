#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "collagen/asset_store.hpp"
#include "collagen/compositor.hpp"
#include "collagen/layout.hpp"

namespace collagen {

/// Background of a scene: a background image or clip scaled to cover the
/// canvas and cropped at `crop`, or a solid color when asset_id is empty.
struct Backdrop {
    std::string asset_id;
    Rgb8 solid{128, 128, 128};
    PixelPoint crop;
    int clip_start = 0;  ///< first frame used from a background clip

    friend bool operator==(const Backdrop&, const Backdrop&) = default;
};

/// A pasted foreground image or clip. Clips are looped forward-backward
/// when shorter than the rendered sequence.
struct ObjectLayer {
    std::string key;
    std::string asset_id;
    Placement placement;
    double brightness = 1.0;

    friend bool operator==(const ObjectLayer&, const ObjectLayer&) = default;
};

struct ShapeLayer {
    std::string key;
    ShapeKind shape = ShapeKind::square;
    Rgb8 color;
    PixelPoint center;
    int size = 0;
    int z_order = 0;

    friend bool operator==(const ShapeLayer&, const ShapeLayer&) = default;
};

struct TextLayer {
    std::string key;
    std::string text;
    Rgb8 color;
    PixelPoint center;
    int glyph_height = 16;
    int z_order = 0;

    friend bool operator==(const TextLayer&, const TextLayer&) = default;
};

using Layer = std::variant<ObjectLayer, ShapeLayer, TextLayer>;

const std::string& layer_key(const Layer& layer);
int layer_z(const Layer& layer);

/// Annotation drawn last, over the visible (unoccluded) part of one layer.
struct AnnotationOverlay {
    std::string layer_key;
    AnnotationStyle style;

    friend bool operator==(const AnnotationOverlay&, const AnnotationOverlay&) = default;
};

struct Scene {
    Extent size;
    Backdrop backdrop;
    std::vector<Layer> layers;
    std::optional<AnnotationOverlay> annotation;

    const Layer* find(std::string_view key) const;

    friend bool operator==(const Scene&, const Scene&) = default;
};

struct RenderedFrame {
    Canvas canvas;
    /// Per-layer canvas-sized coverage (empty unless requested).
    std::map<std::string, Matte, std::less<>> coverage;
};

/// Frame index of a forward-backward loop over `length` frames.
int pingpong_index(int frame, int length);

/// Renders frame `frame` of a scene. `store` may be null for purely
/// procedural scenes.
RenderedFrame render_scene(const Scene& scene, const AssetStore* store, int frame = 0,
                           bool with_coverage = false);

/// Rectangle a layer occupies (objects need the store for native sizes).
PixelRect layer_rect(const Layer& layer, const AssetStore* store);

/// Coverage of layer `key` not hidden by layers drawn after it:
/// alpha_i * prod_j (1 - alpha_j), rounded to 8 bits.
Matte visible_matte(const Scene& scene, const std::map<std::string, Matte, std::less<>>& coverage,
                    std::string_view key);

void to_json(nlohmann::json& j, const Scene& scene);
void from_json(const nlohmann::json& j, Scene& scene);
void to_json(nlohmann::json& j, const Rgb8& c);
void from_json(const nlohmann::json& j, Rgb8& c);

}  // namespace collagen
