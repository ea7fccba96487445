#include "collagen/edit_synth.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>

namespace collagen {

using nlohmann::json;

namespace {

struct TypeName {
    EditType type;
    std::string_view name;
};

constexpr std::array kTypeNames{
    TypeName{EditType::remove, "remove"},
    TypeName{EditType::add, "add"},
    TypeName{EditType::replace, "replace"},
    TypeName{EditType::quantity, "quantity"},
    TypeName{EditType::color, "color"},
    TypeName{EditType::size, "size"},
    TypeName{EditType::seg_detect, "seg_detect"},
    TypeName{EditType::background, "background"},
    TypeName{EditType::text_remove, "text_remove"},
    TypeName{EditType::text_add, "text_add"},
    TypeName{EditType::text_replace, "text_replace"},
    TypeName{EditType::video_remove, "video_remove"},
    TypeName{EditType::video_add, "video_add"},
    TypeName{EditType::video_replace, "video_replace"},
    TypeName{EditType::position, "position"},
};

constexpr std::array kAllTypes = [] {
    std::array<EditType, kTypeNames.size()> out{};
    for (std::size_t i = 0; i < kTypeNames.size(); ++i) out[i] = kTypeNames[i].type;
    return out;
}();

constexpr std::array kPalette{
    NamedColor{"red", {255, 0, 0}},      NamedColor{"green", {0, 255, 0}},
    NamedColor{"blue", {0, 0, 255}},     NamedColor{"yellow", {255, 255, 0}},
    NamedColor{"cyan", {0, 255, 255}},   NamedColor{"magenta", {255, 0, 255}},
    NamedColor{"orange", {255, 128, 0}}, NamedColor{"purple", {128, 0, 255}},
    NamedColor{"white", {255, 255, 255}}, NamedColor{"black", {0, 0, 0}},
};

constexpr std::string_view kTextAlphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";

const std::vector<AspectBin>& bin_table() {
    static const std::vector<AspectBin> bins = make_bins();
    return bins;
}

CaptionPair captions_of(const AssetRecord& rec) { return {rec.caption_brief, rec.caption_detailed}; }

Backdrop image_backdrop(const AssetRecord& bg, Extent size, Rng& rng) {
    const auto cover = cover_extent(bg.extent(), size);
    return {bg.id, {128, 128, 128}, {rng.range(0, cover.width - size.width), rng.range(0, cover.height - size.height)}, 0};
}

Backdrop random_image_backdrop(const AssetIndex& index, Extent size, Rng& rng) {
    return image_backdrop(sample_asset(index, AssetKind::bg_image, rng), size, rng);
}

/// Up to `n` assets with pairwise distinct caption subjects (at least one).
std::vector<const AssetRecord*> pick_distinct(const AssetIndex& index, AssetKind kind, int n, Rng& rng,
                                              std::set<std::string> used = {}) {
    std::vector<const AssetRecord*> out;
    for (int i = 0; i < n; ++i) {
        std::vector<const AssetRecord*> pool;
        for (const auto& [id, rec] : index.entries) {
            if (rec.kind == kind && !used.count(caption_subject(rec.caption_brief))) pool.push_back(&rec);
        }
        if (pool.empty()) break;
        const auto* rec = pool[rng.below(pool.size())];
        used.insert(caption_subject(rec->caption_brief));
        out.push_back(rec);
    }
    if (out.empty()) throw Error("exhausted asset kind: " + std::string(to_string(kind)));
    return out;
}

std::vector<ObjectLayer> place_objects(std::span<const AssetRecord* const> assets, Extent canvas, Rng& rng,
                                       const PlacementConstraints& constraints, std::string_view prefix = "obj") {
    std::vector<PlacementRequest> requests;
    for (const auto* rec : assets) requests.push_back({rec->id, rec->extent()});
    const auto placements = sample_placements(rng, canvas, requests, constraints);
    std::vector<ObjectLayer> layers;
    for (std::size_t i = 0; i < placements.size(); ++i) {
        layers.push_back({std::string(prefix) + std::to_string(i), placements[i].asset_id, placements[i], 1.0});
    }
    return layers;
}

std::vector<Layer> as_layers(const std::vector<ObjectLayer>& objects) {
    return {objects.begin(), objects.end()};
}

std::vector<Layer> without(std::vector<Layer> layers, std::string_view key) {
    std::erase_if(layers, [&](const Layer& l) { return layer_key(l) == key; });
    return layers;
}

/// Largest aspect-preserving placement of `native` inside `rect`, sharing its center.
Placement fit_inside(const std::string& asset_id, Extent native, const PixelRect& rect, int z_order) {
    const double scale = std::min(static_cast<double>(rect.width) / native.width,
                                  static_cast<double>(rect.height) / native.height);
    return {asset_id, {rect.x + rect.width / 2.0, rect.y + rect.height / 2.0}, scale, z_order};
}

int object_count(const SynthConfig& config, Rng& rng) {
    return rng.range(std::max(1, config.min_objects), std::min(6, std::max(config.min_objects, config.max_objects)));
}

std::string random_text(Rng& rng, int length) {
    std::string out;
    for (int i = 0; i < length; ++i) out.push_back(kTextAlphabet[rng.below(kTextAlphabet.size())]);
    return out;
}

int text_glyph_height(Rng& rng, std::size_t length, Extent canvas, const SynthConfig& config) {
    const int fit_w = static_cast<int>(std::floor(0.9 * canvas.width * 7.0 / (6.0 * static_cast<double>(length) - 1.0)));
    const int fit_h = static_cast<int>(std::floor(0.9 * canvas.height));
    const int hi = std::min({config.glyph_max, fit_w, fit_h});
    if (hi < config.glyph_min) throw LayoutError("cannot satisfy layout constraints: text does not fit");
    return rng.range(config.glyph_min, hi);
}

EditRecipe base_recipe(EditType type, BinOrShape where) {
    EditRecipe r;
    r.type = type;
    r.bin_or_shape = std::move(where);
    return r;
}

Extent extent_of(const BinOrShape& where) {
    return std::visit([](const auto& v) { return v.extent(); }, where);
}

std::string_view entity_bank(EntityOp op, bool video) {
    switch (op) {
        case EntityOp::remove: return video ? "video_remove" : "remove";
        case EntityOp::add: return video ? "video_add" : "add";
        case EntityOp::replace: return video ? "video_replace" : "replace";
    }
    throw Error("unknown entity operation");
}

EditType entity_type(EntityOp op, EntityKind kind, bool video) {
    if (video) {
        return op == EntityOp::remove ? EditType::video_remove
               : op == EntityOp::add  ? EditType::video_add
                                      : EditType::video_replace;
    }
    if (kind == EntityKind::text) {
        return op == EntityOp::remove ? EditType::text_remove
               : op == EntityOp::add  ? EditType::text_add
                                      : EditType::text_replace;
    }
    return op == EntityOp::remove ? EditType::remove : op == EntityOp::add ? EditType::add : EditType::replace;
}

/// Object add/remove/replace over image or clip foregrounds on a given backdrop.
EditRecipe object_entity_edit(EntityOp op, AssetKind fg_kind, const AssetIndex& index, BinOrShape where,
                              Backdrop backdrop, Rng& rng, const SynthConfig& config, int max_objects) {
    const bool video = fg_kind == AssetKind::fg_clip;
    const Extent canvas = extent_of(where);
    const int n = std::min(object_count(config, rng), max_objects);
    const auto assets = pick_distinct(index, fg_kind, n, rng);
    const auto objects = place_objects(assets, canvas, rng, config.placement);
    const auto victim_index = rng.below(objects.size());
    const auto& victim = objects[victim_index];
    const auto& victim_rec = *assets[victim_index];

    auto recipe = base_recipe(entity_type(op, EntityKind::object, video), std::move(where));
    recipe.source = {canvas, backdrop, as_layers(objects), std::nullopt};
    recipe.target = recipe.source;
    recipe.edited_keys = {victim.key};
    json params = {{"objects", objects.size()}, {"edited", victim.key}, {"asset", victim.asset_id}};
    std::map<std::string, CaptionPair, std::less<>> captioned{{"subject", captions_of(victim_rec)}};

    switch (op) {
        case EntityOp::remove:
            recipe.target.layers = without(recipe.source.layers, victim.key);
            break;
        case EntityOp::add:
            recipe.source.layers = without(recipe.target.layers, victim.key);
            break;
        case EntityOp::replace: {
            const auto& fresh = *pick_distinct(index, fg_kind, 1, rng, {caption_subject(victim_rec.caption_brief)})[0];
            const auto rect = placement_rect(victim.placement, victim_rec.extent());
            ObjectLayer replacement{"obj_new", fresh.id,
                                    fit_inside(fresh.id, fresh.extent(), rect, victim.placement.z_order), 1.0};
            recipe.target.layers[victim_index] = replacement;
            recipe.edited_keys.push_back(replacement.key);
            params["new_asset"] = fresh.id;
            captioned.emplace("new_subject", captions_of(fresh));
            break;
        }
    }
    recipe.params = std::move(params);
    recipe.instruction = build_instruction(entity_bank(op, video), {}, captioned, rng);
    return recipe;
}

EditRecipe text_entity_edit(EntityOp op, const AssetIndex& index, const AspectBin& bin, Rng& rng,
                            const SynthConfig& config) {
    const Extent canvas = bin.extent();
    const auto backdrop = random_image_backdrop(index, canvas, rng);
    const int n = object_count(config, rng);

    std::vector<TextLayer> texts;
    std::vector<Extent> extents;
    std::set<std::string> seen;
    for (int i = 0; i < n; ++i) {
        std::string text;
        do {
            text = random_text(rng, rng.range(config.text_min_length, config.text_max_length));
        } while (!seen.insert(text).second);
        const int h = text_glyph_height(rng, text.size(), canvas, config);
        const auto color = kPalette[rng.below(kPalette.size())].rgb;
        texts.push_back({"text" + std::to_string(i), std::move(text), color, {}, h, i});
        extents.push_back(text_extent(texts.back().text.size(), h));
    }
    const auto rects = sample_rects(rng, canvas, extents, config.placement.max_overlap, config.placement.retry_cap);
    for (std::size_t i = 0; i < texts.size(); ++i) {
        texts[i].center = {rects[i].x + rects[i].width / 2, rects[i].y + rects[i].height / 2};
    }

    const auto victim_index = rng.below(texts.size());
    const auto victim = texts[victim_index];
    auto recipe = base_recipe(entity_type(op, EntityKind::text, false), bin);
    recipe.source = {canvas, backdrop, {texts.begin(), texts.end()}, std::nullopt};
    recipe.target = recipe.source;
    recipe.edited_keys = {victim.key};
    recipe.params = {{"texts", texts.size()}, {"edited", victim.key}};
    Bindings bindings{{"text", victim.text}};
    std::string_view bank = "text_remove";

    switch (op) {
        case EntityOp::remove:
            recipe.target.layers = without(recipe.source.layers, victim.key);
            break;
        case EntityOp::add:
            recipe.source.layers = without(recipe.target.layers, victim.key);
            bank = "text_add";
            break;
        case EntityOp::replace: {
            TextLayer replacement = victim;
            replacement.key = "text_new";
            do {
                replacement.text = random_text(rng, static_cast<int>(victim.text.size()));
            } while (replacement.text == victim.text);
            recipe.target.layers[victim_index] = replacement;
            recipe.edited_keys.push_back(replacement.key);
            recipe.params["new_text"] = replacement.text;
            bindings.emplace("new_text", replacement.text);
            bank = "text_replace";
            break;
        }
    }
    recipe.instruction = build_instruction(bank, std::move(bindings), {}, rng);
    return recipe;
}

/// Source collage shared by the single-object edits (size, annotation, position).
struct Collage {
    Scene scene;
    std::vector<ObjectLayer> objects;
    std::vector<const AssetRecord*> assets;
};

Collage random_collage(const AssetIndex& index, Extent canvas, Rng& rng, const SynthConfig& config) {
    Collage c;
    const auto backdrop = random_image_backdrop(index, canvas, rng);
    c.assets = pick_distinct(index, AssetKind::fg_image, object_count(config, rng), rng);
    c.objects = place_objects(c.assets, canvas, rng, config.placement);
    c.scene = {canvas, backdrop, as_layers(c.objects), std::nullopt};
    return c;
}

EditType pick_weighted(const EditMix& mix, Rng& rng) {
    double total = 0.0;
    for (const auto& [type, weight] : mix) {
        if (!(weight >= 0.0)) throw Error("edit type weights must be non-negative");
        total += weight;
    }
    if (!(total > 0.0)) throw Error("edit mix has no positive weight");
    double u = rng.uniform() * total;
    for (const auto& [type, weight] : mix) {
        if (u < weight) return type;
        u -= weight;
    }
    for (auto it = mix.rbegin(); it != mix.rend(); ++it) {
        if (it->second > 0.0) return it->first;
    }
    return mix.back().first;
}

}  // namespace

std::string_view to_string(EditType type) {
    for (const auto& entry : kTypeNames) {
        if (entry.type == type) return entry.name;
    }
    throw Error("unknown edit type");
}

EditType edit_type_from_string(std::string_view text) {
    for (const auto& entry : kTypeNames) {
        if (entry.name == text) return entry.type;
    }
    throw Error("unknown edit type '" + std::string(text) + "'");
}

bool is_video(EditType type) {
    return type == EditType::video_remove || type == EditType::video_add || type == EditType::video_replace;
}

std::span<const EditType> all_edit_types() { return kAllTypes; }

std::span<const NamedColor> palette() { return kPalette; }

const NamedColor& palette_color(std::string_view name) {
    for (const auto& c : kPalette) {
        if (c.name == name) return c;
    }
    throw Error("unknown palette color '" + std::string(name) + "'");
}

std::string pluralize(std::string_view noun) {
    std::string out(noun);
    const auto ends = [&](std::string_view s) { return out.size() >= s.size() && out.ends_with(s); };
    out += (ends("s") || ends("x") || ends("z") || ends("ch") || ends("sh")) ? "es" : "s";
    return out;
}

int EditRecipe::frame_count() const {
    if (const auto* shape = std::get_if<VideoShape>(&bin_or_shape)) return shape->frame_count;
    return 1;
}

std::string make_sample_id(RngState seed) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%llu-%08llu", static_cast<unsigned long long>(seed.seed),
                  static_cast<unsigned long long>(seed.stream_id));
    return buf;
}

EditSample realize(const EditRecipe& recipe, const AssetStore& store) {
    const Extent size = extent_of(recipe.bin_or_shape);
    if (recipe.source.size != size || recipe.target.size != size) {
        throw Error("recipe scenes do not match the sampled dimensions");
    }
    EditSample s;
    s.sample_id = make_sample_id(recipe.seed);
    s.edit_type = recipe.type;
    s.instruction = render_instruction(recipe.instruction);
    s.seed = recipe.seed;
    s.bin_or_shape = recipe.bin_or_shape;
    const int frames = recipe.frame_count();
    s.source.reserve(static_cast<std::size_t>(frames));
    s.target.reserve(static_cast<std::size_t>(frames));
    for (int f = 0; f < frames; ++f) {
        s.source.push_back(render_scene(recipe.source, &store, f).canvas.release());
        s.target.push_back(render_scene(recipe.target, &store, f).canvas.release());
    }
    s.provenance = recipe;
    return s;
}

EditRecipe generate_entity_edit(EntityOp op, EntityKind kind, const AssetStore& store, const AspectBin& bin,
                                Rng& rng, const SynthConfig& config) {
    if (kind == EntityKind::text) return text_entity_edit(op, store.index(), bin, rng, config);
    const auto backdrop = random_image_backdrop(store.index(), bin.extent(), rng);
    return object_entity_edit(op, AssetKind::fg_image, store.index(), bin, backdrop, rng, config, 6);
}

EditRecipe generate_quantity_edit(const AssetStore& store, const AspectBin& bin, Rng& rng,
                                  const SynthConfig& config) {
    const Extent canvas = bin.extent();
    const auto& index = store.index();
    const auto backdrop = random_image_backdrop(index, canvas, rng);
    const auto& asset = sample_asset(index, AssetKind::fg_image, rng);
    const int lo = std::max(1, config.min_copies);
    const int hi = std::min(6, config.max_copies);
    if (hi <= lo) throw Error("quantity edits need a copy range with at least two values");
    const int n = rng.range(lo, hi);
    int m = rng.range(1, hi - 1);
    if (m >= n) ++m;

    PlacementConstraints constraints = config.placement;
    constraints.min_fraction = config.copy_min_fraction;
    constraints.max_fraction = config.copy_max_fraction;
    const std::vector<const AssetRecord*> copies(static_cast<std::size_t>(std::max(n, m)), &asset);
    const auto objects = place_objects(copies, canvas, rng, constraints, "copy");

    auto recipe = base_recipe(EditType::quantity, bin);
    recipe.source = {canvas, backdrop, as_layers({objects.begin(), objects.begin() + n}), std::nullopt};
    recipe.target = {canvas, backdrop, as_layers({objects.begin(), objects.begin() + m}), std::nullopt};
    for (int i = std::min(n, m); i < std::max(n, m); ++i) recipe.edited_keys.push_back(objects[static_cast<std::size_t>(i)].key);
    recipe.params = {{"asset", asset.id}, {"source_count", n}, {"target_count", m}};
    recipe.instruction = build_instruction(
        "quantity", {{"subject", pluralize(caption_subject(asset.caption_brief))}, {"count", std::to_string(m)}}, {},
        rng);
    return recipe;
}

EditRecipe generate_color_edit(const AspectBin& bin, Rng& rng, const SynthConfig& config) {
    const Extent canvas = bin.extent();
    const int short_side = std::min(canvas.width, canvas.height);
    const int count = rng.range(config.min_shapes, config.max_shapes);
    std::vector<Extent> sizes;
    for (int i = 0; i < count; ++i) {
        const int side = std::max(
            1, static_cast<int>(std::lround(rng.uniform(config.shape_min_fraction, config.shape_max_fraction) * short_side)));
        sizes.push_back({side, side});
    }
    const auto rects = sample_rects(rng, canvas, sizes, 0.0, config.placement.retry_cap);

    std::vector<ShapeLayer> shapes;
    std::vector<std::size_t> colors;
    for (int i = 0; i < count; ++i) {
        const auto& r = rects[static_cast<std::size_t>(i)];
        const auto kind = static_cast<ShapeKind>(rng.below(4));
        colors.push_back(rng.below(kPalette.size()));
        shapes.push_back({"shape" + std::to_string(i), kind, kPalette[colors.back()].rgb,
                          {r.x + r.width / 2, r.y + r.height / 2}, r.width, i});
    }
    std::vector<std::size_t> unique;
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        const auto same = std::count_if(shapes.begin(), shapes.end(), [&](const ShapeLayer& s) {
            return s.shape == shapes[i].shape && s.color == shapes[i].color;
        });
        if (same == 1) unique.push_back(i);
    }
    if (unique.empty()) throw LayoutError("cannot satisfy layout constraints: no unambiguous shape");
    const auto victim = unique[rng.below(unique.size())];
    const auto from = colors[victim];
    auto to = rng.below(kPalette.size() - 1);
    if (to >= from) ++to;

    const Backdrop backdrop{"", [&] {
                                const auto v = static_cast<std::uint8_t>(rng.range(96, 160));
                                return Rgb8{v, v, v};
                            }(),
                            {}, 0};
    auto recipe = base_recipe(EditType::color, bin);
    recipe.source = {canvas, backdrop, {shapes.begin(), shapes.end()}, std::nullopt};
    recipe.target = recipe.source;
    std::get<ShapeLayer>(recipe.target.layers[victim]).color = kPalette[to].rgb;
    recipe.edited_keys = {shapes[victim].key};
    recipe.params = {{"shapes", count},
                     {"edited", shapes[victim].key},
                     {"color_a", kPalette[from].name},
                     {"color_b", kPalette[to].name}};
    recipe.instruction = build_instruction("color",
                                           {{"color_a", std::string(kPalette[from].name)},
                                            {"shape", std::string(to_string(shapes[victim].shape))},
                                            {"color_b", std::string(kPalette[to].name)}},
                                           {}, rng);
    return recipe;
}

EditRecipe generate_size_edit(const AssetStore& store, const AspectBin& bin, Rng& rng, const SynthConfig& config) {
    if (config.size_factors.empty()) throw Error("no size factors configured");
    auto c = random_collage(store.index(), bin.extent(), rng, config);
    const auto v = rng.below(c.objects.size());
    const auto& victim = c.objects[v];
    const Extent native = c.assets[v]->extent();
    const double factor = config.size_factors[rng.below(config.size_factors.size())];

    const auto rect = placement_rect(victim.placement, native);
    const double want_w = factor * rect.width;
    const double want_h = factor * rect.height;
    const auto error = [&](double s) {
        return std::max(std::abs(scaled_length(native.width, s) - want_w),
                        std::abs(scaled_length(native.height, s) - want_h));
    };
    const double s0 = victim.placement.scale * factor;
    const double s1 = std::round(want_w) / native.width;
    const double s2 = std::round(want_h) / native.height;
    double best = s0;
    for (double s : {s1, s2, 0.5 * (s1 + s2)}) {
        if (error(s) < error(best)) best = s;
    }
    if (error(best) > 1.0) throw LayoutError("cannot satisfy layout constraints: size factor not representable");

    ObjectLayer resized = victim;
    resized.placement.scale = best;
    if (!placement_rect(resized.placement, native).inside(bin.extent())) {
        throw LayoutError("cannot satisfy layout constraints: resized object leaves the canvas");
    }
    auto recipe = base_recipe(EditType::size, bin);
    recipe.source = c.scene;
    recipe.target = c.scene;
    recipe.target.layers[v] = resized;
    recipe.edited_keys = {victim.key};
    recipe.params = {{"edited", victim.key}, {"asset", victim.asset_id}, {"factor", factor}, {"scale", best}};
    recipe.instruction = build_instruction("size", {{"direction", factor > 1.0 ? "bigger" : "smaller"}},
                                           {{"subject", captions_of(*c.assets[v])}}, rng);
    return recipe;
}

EditRecipe generate_annotation_edit(const AssetStore& store, const AspectBin& bin, Rng& rng,
                                    const AnnotationStyle& style, const SynthConfig& config) {
    const auto named = std::find_if(kPalette.begin(), kPalette.end(), [&](const NamedColor& c) { return c.rgb == style.color; });
    if (named == kPalette.end()) throw Error("annotation color is not a palette color");
    auto c = random_collage(store.index(), bin.extent(), rng, config);
    const auto v = rng.below(c.objects.size());
    const auto& victim = c.objects[v];

    auto recipe = base_recipe(EditType::seg_detect, bin);
    recipe.source = c.scene;
    recipe.target = c.scene;
    recipe.target.annotation = AnnotationOverlay{victim.key, style};
    const auto frame = render_scene(recipe.source, &store, 0, true);
    if (support_bbox(visible_matte(recipe.source, frame.coverage, victim.key)).empty()) {
        throw LayoutError("cannot satisfy layout constraints: annotated object fully occluded");
    }
    recipe.edited_keys = {victim.key};
    recipe.params = {{"edited", victim.key}, {"mode", to_string(style.mode)}, {"color", named->name}};
    recipe.instruction = build_instruction(style.mode == AnnotationMode::mask_fill ? "seg_mask" : "seg_bbox",
                                           {{"color", std::string(named->name)}},
                                           {{"subject", captions_of(*c.assets[v])}}, rng);
    return recipe;
}

EditRecipe generate_background_edit(const AssetStore& store, const AspectBin& bin, Rng& rng,
                                    const SynthConfig& config) {
    const auto& index = store.index();
    const Extent canvas = bin.extent();
    const auto& original = sample_asset(index, AssetKind::bg_image, rng);
    const auto& distractor =
        sample_asset_if(index, AssetKind::bg_image, rng, [&](const AssetRecord& r) { return r.id != original.id; });
    const auto target_backdrop = image_backdrop(original, canvas, rng);
    const auto source_backdrop = image_backdrop(distractor, canvas, rng);
    const auto assets = pick_distinct(index, AssetKind::fg_image, object_count(config, rng), rng);
    const auto objects = place_objects(assets, canvas, rng, config.placement);
    const double factor = rng.uniform(config.brightness_min, config.brightness_max);

    auto perturbed = objects;
    for (auto& o : perturbed) o.brightness = factor;
    auto recipe = base_recipe(EditType::background, bin);
    recipe.source = {canvas, source_backdrop, as_layers(perturbed), std::nullopt};
    recipe.target = {canvas, target_backdrop, as_layers(objects), std::nullopt};
    for (const auto& o : objects) recipe.edited_keys.push_back(o.key);
    recipe.params = {{"background", original.id}, {"distractor", distractor.id}, {"brightness", factor}};
    recipe.instruction = build_instruction("background", {}, {{"bg_subject", captions_of(original)}}, rng);
    return recipe;
}

EditRecipe generate_position_edit(const AssetStore& store, const AspectBin& bin, Rng& rng,
                                  const SynthConfig& config) {
    const Extent canvas = bin.extent();
    auto c = random_collage(store.index(), canvas, rng, config);
    const auto v = rng.below(c.objects.size());
    const auto& victim = c.objects[v];
    const auto rect = placement_rect(victim.placement, c.assets[v]->extent());

    static constexpr std::array<std::string_view, 4> kDirections{"left", "right", "up", "down"};
    const auto dir = rng.below(kDirections.size());
    const bool horizontal = dir < 2;
    const int axis = horizontal ? canvas.width : canvas.height;
    int shift = static_cast<int>(std::lround(rng.uniform(config.shift_min_fraction, config.shift_max_fraction) * axis));
    const int room = dir == 0 ? rect.x : dir == 1 ? canvas.width - rect.right() : dir == 2 ? rect.y : canvas.height - rect.bottom();
    shift = std::min(shift, room);
    if (shift < 8) throw LayoutError("cannot satisfy layout constraints: no room to move");

    ObjectLayer moved = victim;
    const int sign = (dir == 0 || dir == 2) ? -1 : 1;
    (horizontal ? moved.placement.center.x : moved.placement.center.y) += sign * shift;
    auto recipe = base_recipe(EditType::position, bin);
    recipe.source = c.scene;
    recipe.target = c.scene;
    recipe.target.layers[v] = moved;
    recipe.edited_keys = {victim.key};
    recipe.params = {{"edited", victim.key}, {"direction", kDirections[dir]}, {"shift", shift}};
    recipe.instruction = build_instruction("position", {{"direction", std::string(kDirections[dir])}},
                                           {{"subject", captions_of(*c.assets[v])}}, rng);
    return recipe;
}

EditRecipe generate_video_edit(EntityOp op, const AssetStore& store, const VideoShape& shape, Rng& rng,
                               const SynthConfig& config) {
    const auto& index = store.index();
    if (index.count(AssetKind::bg_clip) == 0) throw Error("exhausted asset kind: bg_clip");
    const auto& clip = sample_asset_if(index, AssetKind::bg_clip, rng,
                                       [&](const AssetRecord& r) { return r.frame_count >= shape.frame_count; });
    Backdrop backdrop = image_backdrop(clip, shape.extent(), rng);
    backdrop.clip_start = rng.range(0, clip.frame_count - shape.frame_count);
    return object_entity_edit(op, AssetKind::fg_clip, index, shape, backdrop, rng, config,
                              std::max(1, config.max_video_objects));
}

EditRecipe generate_recipe(EditType type, const AssetStore& store, const BinOrShape& where, Rng& rng,
                           const SynthConfig& config) {
    if (is_video(type)) {
        const auto* shape = std::get_if<VideoShape>(&where);
        if (!shape) throw Error("video edit types need a video shape");
        const auto op = type == EditType::video_remove ? EntityOp::remove
                        : type == EditType::video_add  ? EntityOp::add
                                                       : EntityOp::replace;
        return generate_video_edit(op, store, *shape, rng, config);
    }
    const auto* bin = std::get_if<AspectBin>(&where);
    if (!bin) throw Error("image edit types need an aspect bin");
    switch (type) {
        case EditType::remove: return generate_entity_edit(EntityOp::remove, EntityKind::object, store, *bin, rng, config);
        case EditType::add: return generate_entity_edit(EntityOp::add, EntityKind::object, store, *bin, rng, config);
        case EditType::replace: return generate_entity_edit(EntityOp::replace, EntityKind::object, store, *bin, rng, config);
        case EditType::text_remove: return generate_entity_edit(EntityOp::remove, EntityKind::text, store, *bin, rng, config);
        case EditType::text_add: return generate_entity_edit(EntityOp::add, EntityKind::text, store, *bin, rng, config);
        case EditType::text_replace: return generate_entity_edit(EntityOp::replace, EntityKind::text, store, *bin, rng, config);
        case EditType::quantity: return generate_quantity_edit(store, *bin, rng, config);
        case EditType::color: return generate_color_edit(*bin, rng, config);
        case EditType::size: return generate_size_edit(store, *bin, rng, config);
        case EditType::background: return generate_background_edit(store, *bin, rng, config);
        case EditType::position: return generate_position_edit(store, *bin, rng, config);
        case EditType::seg_detect: {
            AnnotationStyle style;
            style.mode = rng.coin() ? AnnotationMode::bbox_outline : AnnotationMode::mask_fill;
            style.color = kPalette[rng.below(kPalette.size())].rgb;
            return generate_annotation_edit(store, *bin, rng, style, config);
        }
        default: break;
    }
    throw Error("unsupported edit type");
}

EditMix default_image_mix() {
    return {{EditType::remove, 1.0},       {EditType::add, 1.0},          {EditType::replace, 1.0},
            {EditType::quantity, 1.0},     {EditType::color, 1.0},        {EditType::size, 1.0},
            {EditType::seg_detect, 1.0},   {EditType::background, 1.0},   {EditType::text_remove, 1.0 / 3.0},
            {EditType::text_add, 1.0 / 3.0}, {EditType::text_replace, 1.0 / 3.0}};
}

EditMix default_video_mix() {
    return {{EditType::video_remove, 1.0}, {EditType::video_add, 1.0}, {EditType::video_replace, 1.0}};
}

EditMix parse_edit_mix(std::string_view text) {
    EditMix mix;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto comma = std::min(text.find(',', pos), text.size());
        const auto item = text.substr(pos, comma - pos);
        pos = comma + 1;
        if (item.empty()) continue;
        const auto colon = item.find(':');
        const auto type = edit_type_from_string(item.substr(0, colon));
        double weight = 1.0;
        if (colon != std::string_view::npos) {
            const auto w = item.substr(colon + 1);
            const auto [end, ec] = std::from_chars(w.data(), w.data() + w.size(), weight);
            if (ec != std::errc() || end != w.data() + w.size() || !(weight >= 0.0)) {
                throw Error("invalid weight in edit type list: '" + std::string(item) + "'");
            }
        }
        if (std::any_of(mix.begin(), mix.end(), [&](const auto& e) { return e.first == type; })) {
            throw Error("edit type listed twice: '" + std::string(to_string(type)) + "'");
        }
        mix.emplace_back(type, weight);
    }
    if (mix.empty()) throw Error("empty edit type list");
    return mix;
}

std::string format_edit_mix(const EditMix& mix) {
    std::string out;
    for (const auto& [type, weight] : mix) {
        if (!out.empty()) out += ',';
        char buf[32];
        const auto res = std::to_chars(buf, buf + sizeof buf, weight);
        out += std::string(to_string(type)) + ":" + std::string(buf, res.ptr);
    }
    return out;
}

EditType planned_edit_type(const GenerationPlan& plan, RngState seed) {
    if (plan.mix.empty()) throw Error("empty edit mix");
    Rng root(seed);
    return pick_weighted(plan.mix, root);
}

EditSample synthesize(const GenerationPlan& plan, const AssetStore& store, RngState seed) {
    if (plan.mix.empty()) throw Error("empty edit mix");
    Rng root(seed);
    const EditType type = pick_weighted(plan.mix, root);
    BinOrShape where;
    if (is_video(type)) {
        where = plan.video_shape ? *plan.video_shape : sample_video_shape(root, plan.synth.resolution_order);
    } else {
        where = plan.bin ? *plan.bin : bin_table()[root.below(bin_table().size())];
    }
    std::string last = "no attempts";
    for (int attempt = 0; attempt < std::max(1, plan.synth.attempts); ++attempt) {
        Rng rng(seed.child(static_cast<std::uint64_t>(attempt) + 1));
        try {
            auto recipe = generate_recipe(type, store, where, rng, plan.synth);
            recipe.seed = seed;
            return realize(recipe, store);
        } catch (const LayoutError& e) {
            last = e.what();
        }
    }
    throw LayoutError("no valid layout after " + std::to_string(plan.synth.attempts) + " attempts: " + last);
}

void to_json(json& j, const SynthConfig& c) {
    j = {{"objects", {c.min_objects, c.max_objects}},
         {"placement",
          {{"min_fraction", c.placement.min_fraction},
           {"max_fraction", c.placement.max_fraction},
           {"max_overlap", c.placement.max_overlap},
           {"retry_cap", c.placement.retry_cap}}},
         {"copies", {c.min_copies, c.max_copies}},
         {"copy_fraction", {c.copy_min_fraction, c.copy_max_fraction}},
         {"shapes", {c.min_shapes, c.max_shapes}},
         {"shape_fraction", {c.shape_min_fraction, c.shape_max_fraction}},
         {"size_factors", c.size_factors},
         {"brightness", {c.brightness_min, c.brightness_max}},
         {"text_length", {c.text_min_length, c.text_max_length}},
         {"glyph_height", {c.glyph_min, c.glyph_max}},
         {"max_video_objects", c.max_video_objects},
         {"shift_fraction", {c.shift_min_fraction, c.shift_max_fraction}},
         {"attempts", c.attempts},
         {"resolution_order",
          c.resolution_order == ResolutionOrder::height_by_width ? "height_by_width" : "width_by_height"}};
}

void from_json(const json& j, SynthConfig& c) {
    const auto pair = [&](const char* key, auto& lo, auto& hi) {
        j.at(key).at(0).get_to(lo);
        j.at(key).at(1).get_to(hi);
    };
    pair("objects", c.min_objects, c.max_objects);
    const auto& p = j.at("placement");
    p.at("min_fraction").get_to(c.placement.min_fraction);
    p.at("max_fraction").get_to(c.placement.max_fraction);
    p.at("max_overlap").get_to(c.placement.max_overlap);
    p.at("retry_cap").get_to(c.placement.retry_cap);
    pair("copies", c.min_copies, c.max_copies);
    pair("copy_fraction", c.copy_min_fraction, c.copy_max_fraction);
    pair("shapes", c.min_shapes, c.max_shapes);
    pair("shape_fraction", c.shape_min_fraction, c.shape_max_fraction);
    j.at("size_factors").get_to(c.size_factors);
    pair("brightness", c.brightness_min, c.brightness_max);
    pair("text_length", c.text_min_length, c.text_max_length);
    pair("glyph_height", c.glyph_min, c.glyph_max);
    j.at("max_video_objects").get_to(c.max_video_objects);
    pair("shift_fraction", c.shift_min_fraction, c.shift_max_fraction);
    j.at("attempts").get_to(c.attempts);
    c.resolution_order = j.at("resolution_order").get<std::string>() == "width_by_height"
                             ? ResolutionOrder::width_by_height
                             : ResolutionOrder::height_by_width;
}

json to_json(const BinOrShape& where) {
    if (const auto* bin = std::get_if<AspectBin>(&where)) {
        return {{"kind", "bin"}, {"index", bin->index}, {"aspect", bin->aspect}, {"width", bin->width}, {"height", bin->height}};
    }
    const auto& shape = std::get<VideoShape>(where);
    return {{"kind", "video"}, {"frame_count", shape.frame_count}, {"width", shape.width}, {"height", shape.height}};
}

BinOrShape bin_or_shape_from_json(const json& j) {
    if (j.at("kind").get<std::string>() == "bin") {
        return AspectBin{j.at("index").get<int>(), j.at("aspect").get<double>(), j.at("width").get<int>(),
                         j.at("height").get<int>()};
    }
    return VideoShape{j.at("frame_count").get<int>(), j.at("width").get<int>(), j.at("height").get<int>()};
}

void to_json(json& j, const EditRecipe& r) {
    j = {{"type", to_string(r.type)},
         {"seed", {{"seed", r.seed.seed}, {"stream_id", r.seed.stream_id}}},
         {"bin_or_shape", to_json(r.bin_or_shape)},
         {"source", r.source},
         {"target", r.target},
         {"edited", r.edited_keys},
         {"instruction",
          {{"bank", r.instruction.bank},
           {"template", r.instruction.template_index},
           {"verbosity", to_string(r.instruction.verbosity)},
           {"bindings", r.instruction.bindings}}},
         {"params", r.params}};
}

void from_json(const json& j, EditRecipe& r) {
    r.type = edit_type_from_string(j.at("type").get<std::string>());
    r.seed = {j.at("seed").at("seed").get<std::uint64_t>(), j.at("seed").at("stream_id").get<std::uint64_t>()};
    r.bin_or_shape = bin_or_shape_from_json(j.at("bin_or_shape"));
    j.at("source").get_to(r.source);
    j.at("target").get_to(r.target);
    j.at("edited").get_to(r.edited_keys);
    const auto& ins = j.at("instruction");
    r.instruction.bank = ins.at("bank").get<std::string>();
    r.instruction.template_index = ins.at("template").get<int>();
    r.instruction.verbosity = verbosity_from_string(ins.at("verbosity").get<std::string>());
    r.instruction.bindings.clear();
    for (const auto& [k, v] : ins.at("bindings").items()) r.instruction.bindings.emplace(k, v.get<std::string>());
    r.params = j.at("params");
}

}  // namespace collagen
