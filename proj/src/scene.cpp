#include "collagen/scene.hpp"

#include <algorithm>
#include <cmath>

namespace collagen {

using nlohmann::json;

const std::string& layer_key(const Layer& layer) {
    return std::visit([](const auto& l) -> const std::string& { return l.key; }, layer);
}

int layer_z(const Layer& layer) {
    if (const auto* obj = std::get_if<ObjectLayer>(&layer)) return obj->placement.z_order;
    if (const auto* shape = std::get_if<ShapeLayer>(&layer)) return shape->z_order;
    return std::get<TextLayer>(layer).z_order;
}

const Layer* Scene::find(std::string_view key) const {
    for (const auto& layer : layers) {
        if (layer_key(layer) == key) return &layer;
    }
    return nullptr;
}

int pingpong_index(int frame, int length) {
    if (length <= 0) throw Error("pingpong over an empty clip");
    if (length == 1) return 0;
    const int period = 2 * (length - 1);
    const int p = frame % period;
    return p < length ? p : period - p;
}

namespace {

std::vector<const Layer*> z_sorted(const Scene& scene) {
    std::vector<const Layer*> order;
    for (const auto& layer : scene.layers) order.push_back(&layer);
    std::stable_sort(order.begin(), order.end(),
                     [](const Layer* a, const Layer* b) { return layer_z(*a) < layer_z(*b); });
    return order;
}

const AssetStore& need_store(const AssetStore* store) {
    if (!store) throw Error("scene references assets but no store was given");
    return *store;
}

Canvas render_backdrop(const Scene& scene, const AssetStore* store, int frame) {
    const auto& bd = scene.backdrop;
    if (bd.asset_id.empty()) return Canvas(scene.size.width, scene.size.height, bd.solid);
    const auto& s = need_store(store);
    const auto& rec = s.index().at(bd.asset_id);
    if (rec.kind == AssetKind::bg_image) {
        return Canvas(resample_cover(s.background(bd.asset_id)->pixels, scene.size, bd.crop));
    }
    if (rec.kind == AssetKind::bg_clip) {
        const auto clip = s.clip(bd.asset_id);
        const int index = bd.clip_start + frame;
        if (index < 0 || index >= clip->frame_count()) throw Error("clip too short for requested frame");
        return Canvas(resample_cover(clip->frames[static_cast<std::size_t>(index)], scene.size, bd.crop));
    }
    throw Error("backdrop asset '" + bd.asset_id + "' is not a background");
}

const RgbaImage& object_frame(const ObjectLayer& obj, const AssetStore& store, int frame,
                              std::shared_ptr<const void>& keep_alive) {
    const auto& rec = store.index().at(obj.asset_id);
    if (rec.kind == AssetKind::fg_image) {
        auto fg = store.foreground(obj.asset_id);
        const auto& pixels = fg->pixels;
        keep_alive = std::move(fg);
        return pixels;
    }
    if (rec.kind == AssetKind::fg_clip) {
        auto clip = store.clip(obj.asset_id);
        const auto& pixels = clip->matted[static_cast<std::size_t>(pingpong_index(frame, clip->frame_count()))];
        keep_alive = std::move(clip);
        return pixels;
    }
    throw Error("layer asset '" + obj.asset_id + "' is not a foreground");
}

}  // namespace

PixelRect layer_rect(const Layer& layer, const AssetStore* store) {
    if (const auto* obj = std::get_if<ObjectLayer>(&layer)) {
        const auto& rec = need_store(store).index().at(obj->asset_id);
        return placement_rect(obj->placement, rec.extent());
    }
    if (const auto* shape = std::get_if<ShapeLayer>(&layer)) {
        return centered_rect(shape->center, {shape->size, shape->size});
    }
    const auto& text = std::get<TextLayer>(layer);
    return centered_rect(text.center, text_extent(text.text.size(), text.glyph_height));
}

RenderedFrame render_scene(const Scene& scene, const AssetStore* store, int frame, bool with_coverage) {
    RenderedFrame out{render_backdrop(scene, store, frame), {}};
    const bool track = with_coverage || scene.annotation.has_value();

    for (const Layer* layer : z_sorted(scene)) {
        Matte* coverage = nullptr;
        if (track) {
            coverage = &out.coverage.insert_or_assign(layer_key(*layer), Matte(scene.size.width, scene.size.height))
                            .first->second;
        }
        if (const auto* obj = std::get_if<ObjectLayer>(layer)) {
            if (!(obj->placement.scale > 0.0) || obj->placement.scale > 8.0) {
                throw Error("placement scale outside (0, 8]");
            }
            std::shared_ptr<const void> keep;
            const auto& native = object_frame(*obj, need_store(store), frame, keep);
            const auto rect = placement_rect(obj->placement, native.extent());
            if (!rect.inside(scene.size)) throw LayoutError("placement out of bounds");
            auto sprite = resample_bilinear(native, {rect.width, rect.height});
            if (obj->brightness != 1.0) sprite = adjust_brightness(sprite, obj->brightness);
            composite_sprite(out.canvas, sprite, rect, coverage);
        } else if (const auto* shape = std::get_if<ShapeLayer>(layer)) {
            if (shape->size == 0) continue;
            const auto rect = centered_rect(shape->center, {shape->size, shape->size});
            composite_color(out.canvas, shape->color, rasterize_shape(shape->shape, shape->size), rect, coverage);
        } else {
            const auto& text = std::get<TextLayer>(*layer);
            const auto sprite = rasterize_text(text.text, text.glyph_height);
            composite_color(out.canvas, text.color, sprite, centered_rect(text.center, sprite.extent()), coverage);
        }
    }

    if (scene.annotation) {
        const auto visible = visible_matte(scene, out.coverage, scene.annotation->layer_key);
        out.canvas = render_annotation(std::move(out.canvas), visible, scene.annotation->style);
    }
    if (!with_coverage) out.coverage.clear();
    return out;
}

Matte visible_matte(const Scene& scene, const std::map<std::string, Matte, std::less<>>& coverage,
                    std::string_view key) {
    const auto order = z_sorted(scene);
    auto self = std::find_if(order.begin(), order.end(), [&](const Layer* l) { return layer_key(*l) == key; });
    if (self == order.end()) throw Error("annotation refers to unknown layer '" + std::string(key) + "'");
    const auto lookup = [&](std::string_view k) -> const Matte& {
        const auto found = coverage.find(k);
        if (found == coverage.end()) throw Error("missing coverage for layer '" + std::string(k) + "'");
        return found->second;
    };
    const auto& own = lookup(key);
    std::vector<const Matte*> above;
    for (auto it = std::next(self); it != order.end(); ++it) above.push_back(&lookup(layer_key(**it)));

    Matte out(own.width(), own.height());
    for (int y = 0; y < own.height(); ++y) {
        for (int x = 0; x < own.width(); ++x) {
            double a = own(x, y) / 255.0;
            if (a == 0.0) continue;
            for (const Matte* m : above) a *= 1.0 - (*m)(x, y) / 255.0;
            out(x, y) = static_cast<std::uint8_t>(std::lround(a * 255.0));
        }
    }
    return out;
}

void to_json(json& j, const Rgb8& c) { j = json::array({c.r, c.g, c.b}); }

void from_json(const json& j, Rgb8& c) {
    c = {j.at(0).get<std::uint8_t>(), j.at(1).get<std::uint8_t>(), j.at(2).get<std::uint8_t>()};
}

namespace {

json point_json(PixelPoint p) { return json::array({p.x, p.y}); }
PixelPoint point_from(const json& j) { return {j.at(0).get<int>(), j.at(1).get<int>()}; }

json layer_json(const Layer& layer) {
    if (const auto* obj = std::get_if<ObjectLayer>(&layer)) {
        return {{"type", "object"},
                {"key", obj->key},
                {"asset", obj->asset_id},
                {"center", json::array({obj->placement.center.x, obj->placement.center.y})},
                {"scale", obj->placement.scale},
                {"z", obj->placement.z_order},
                {"brightness", obj->brightness}};
    }
    if (const auto* shape = std::get_if<ShapeLayer>(&layer)) {
        return {{"type", "shape"},         {"key", shape->key},   {"shape", to_string(shape->shape)},
                {"color", shape->color},   {"center", point_json(shape->center)},
                {"size", shape->size},     {"z", shape->z_order}};
    }
    const auto& text = std::get<TextLayer>(layer);
    return {{"type", "text"},        {"key", text.key},       {"text", text.text},
            {"color", text.color},   {"center", point_json(text.center)},
            {"glyph_height", text.glyph_height}, {"z", text.z_order}};
}

Layer layer_from(const json& j) {
    const auto type = j.at("type").get<std::string>();
    if (type == "object") {
        ObjectLayer obj;
        obj.key = j.at("key").get<std::string>();
        obj.asset_id = j.at("asset").get<std::string>();
        obj.placement = {obj.asset_id,
                         {j.at("center").at(0).get<double>(), j.at("center").at(1).get<double>()},
                         j.at("scale").get<double>(),
                         j.at("z").get<int>()};
        obj.brightness = j.at("brightness").get<double>();
        return obj;
    }
    if (type == "shape") {
        return ShapeLayer{j.at("key").get<std::string>(), shape_kind_from_string(j.at("shape").get<std::string>()),
                          j.at("color").get<Rgb8>(),      point_from(j.at("center")),
                          j.at("size").get<int>(),        j.at("z").get<int>()};
    }
    if (type == "text") {
        return TextLayer{j.at("key").get<std::string>(), j.at("text").get<std::string>(),
                         j.at("color").get<Rgb8>(),      point_from(j.at("center")),
                         j.at("glyph_height").get<int>(), j.at("z").get<int>()};
    }
    throw Error("unknown layer type '" + type + "'");
}

}  // namespace

void to_json(json& j, const Scene& scene) {
    json layers = json::array();
    for (const auto& layer : scene.layers) layers.push_back(layer_json(layer));
    j = {{"size", json::array({scene.size.width, scene.size.height})},
         {"backdrop",
          {{"asset", scene.backdrop.asset_id},
           {"solid", scene.backdrop.solid},
           {"crop", point_json(scene.backdrop.crop)},
           {"clip_start", scene.backdrop.clip_start}}},
         {"layers", layers}};
    if (scene.annotation) {
        j["annotation"] = {{"layer", scene.annotation->layer_key},
                           {"mode", to_string(scene.annotation->style.mode)},
                           {"color", scene.annotation->style.color},
                           {"thickness", scene.annotation->style.outline_thickness}};
    } else {
        j["annotation"] = nullptr;
    }
}

void from_json(const json& j, Scene& scene) {
    scene.size = {j.at("size").at(0).get<int>(), j.at("size").at(1).get<int>()};
    const auto& bd = j.at("backdrop");
    scene.backdrop = {bd.at("asset").get<std::string>(), bd.at("solid").get<Rgb8>(), point_from(bd.at("crop")),
                      bd.at("clip_start").get<int>()};
    scene.layers.clear();
    for (const auto& l : j.at("layers")) scene.layers.push_back(layer_from(l));
    scene.annotation.reset();
    if (const auto& a = j.at("annotation"); !a.is_null()) {
        scene.annotation = AnnotationOverlay{
            a.at("layer").get<std::string>(),
            {annotation_mode_from_string(a.at("mode").get<std::string>()), a.at("color").get<Rgb8>(),
             a.at("thickness").get<int>()}};
    }
}

}  // namespace collagen
