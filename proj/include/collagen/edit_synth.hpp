#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "collagen/asset_store.hpp"
#include "collagen/instructions.hpp"
#include "collagen/layout.hpp"
#include "collagen/scene.hpp"

namespace collagen {

enum class EditType {
    remove,
    add,
    replace,
    quantity,
    color,
    size,
    seg_detect,
    background,
    text_remove,
    text_add,
    text_replace,
    video_remove,
    video_add,
    video_replace,
    position,
};

std::string_view to_string(EditType type);
EditType edit_type_from_string(std::string_view text);
bool is_video(EditType type);
std::span<const EditType> all_edit_types();

enum class EntityOp { add, remove, replace };
enum class EntityKind { object, text };

/// Named palette shared by shape colors and annotation colors.
struct NamedColor {
    std::string_view name;
    Rgb8 rgb;
};
std::span<const NamedColor> palette();
const NamedColor& palette_color(std::string_view name);

struct SynthConfig {
    int min_objects = 1;
    int max_objects = 4;
    PlacementConstraints placement;

    int min_copies = 2;
    int max_copies = 6;
    double copy_min_fraction = 0.12;
    double copy_max_fraction = 0.3;

    int min_shapes = 2;
    int max_shapes = 4;
    double shape_min_fraction = 0.15;
    double shape_max_fraction = 0.35;

    std::vector<double> size_factors{0.8, 1.2};
    double brightness_min = 0.8;
    double brightness_max = 1.2;

    int text_min_length = 3;
    int text_max_length = 12;
    int glyph_min = 16;
    int glyph_max = 48;

    int max_video_objects = 2;
    double shift_min_fraction = 0.1;
    double shift_max_fraction = 0.3;

    int attempts = 16;  ///< layout retries per stream id
    ResolutionOrder resolution_order = ResolutionOrder::height_by_width;
};

void to_json(nlohmann::json& j, const SynthConfig& config);
void from_json(const nlohmann::json& j, SynthConfig& config);

using BinOrShape = std::variant<AspectBin, VideoShape>;

/// Complete description of one sample: the two scenes plus the instruction.
/// Rendering a recipe is deterministic, so it doubles as provenance.
struct EditRecipe {
    EditType type = EditType::remove;
    RngState seed;
    BinOrShape bin_or_shape;
    Scene source;
    Scene target;
    std::vector<std::string> edited_keys;  ///< layers whose pixels may change
    InstructionSpec instruction;
    nlohmann::json params = nlohmann::json::object();

    int frame_count() const;
    friend bool operator==(const EditRecipe&, const EditRecipe&) = default;
};

void to_json(nlohmann::json& j, const EditRecipe& recipe);
void from_json(const nlohmann::json& j, EditRecipe& recipe);

/// Frames of one side of a pair (a single frame for images).
using Frames = std::vector<RgbImage>;

struct EditSample {
    std::string sample_id;
    EditType edit_type = EditType::remove;
    std::string instruction;
    Frames source;
    Frames target;
    RngState seed;
    BinOrShape bin_or_shape;
    EditRecipe provenance;

    friend bool operator==(const EditSample&, const EditSample&) = default;
};

std::string make_sample_id(RngState seed);

/// Renders both scenes of a recipe into a sample.
EditSample realize(const EditRecipe& recipe, const AssetStore& store);

EditRecipe generate_entity_edit(EntityOp op, EntityKind kind, const AssetStore& store, const AspectBin& bin,
                                Rng& rng, const SynthConfig& config = {});
EditRecipe generate_quantity_edit(const AssetStore& store, const AspectBin& bin, Rng& rng,
                                  const SynthConfig& config = {});
EditRecipe generate_color_edit(const AspectBin& bin, Rng& rng, const SynthConfig& config = {});
EditRecipe generate_size_edit(const AssetStore& store, const AspectBin& bin, Rng& rng,
                              const SynthConfig& config = {});
/// The style color must be a palette entry so the instruction can name it.
EditRecipe generate_annotation_edit(const AssetStore& store, const AspectBin& bin, Rng& rng,
                                    const AnnotationStyle& style, const SynthConfig& config = {});
EditRecipe generate_background_edit(const AssetStore& store, const AspectBin& bin, Rng& rng,
                                    const SynthConfig& config = {});
EditRecipe generate_position_edit(const AssetStore& store, const AspectBin& bin, Rng& rng,
                                  const SynthConfig& config = {});
EditRecipe generate_video_edit(EntityOp op, const AssetStore& store, const VideoShape& shape, Rng& rng,
                               const SynthConfig& config = {});

/// Dispatch by type. Image types need an AspectBin, video types a VideoShape.
EditRecipe generate_recipe(EditType type, const AssetStore& store, const BinOrShape& where, Rng& rng,
                           const SynthConfig& config = {});

using EditMix = std::vector<std::pair<EditType, double>>;

/// Nine image edit types with equal weight (the three text operations share
/// one type's weight).
EditMix default_image_mix();
EditMix default_video_mix();
/// "remove,add:2,color" -> weights; omitted weights are 1.
EditMix parse_edit_mix(std::string_view text);
std::string format_edit_mix(const EditMix& mix);

struct GenerationPlan {
    EditMix mix;
    std::optional<AspectBin> bin;          ///< fixed bin; otherwise uniform over the 31
    std::optional<VideoShape> video_shape; ///< fixed shape; otherwise sampled
    SynthConfig synth;
};

/// One sample as a pure function of (plan, store, seed, stream_id). Layout
/// failures are retried on fresh sub-streams; after config.attempts the
/// last LayoutError propagates.
EditSample synthesize(const GenerationPlan& plan, const AssetStore& store, RngState seed);

/// The edit type synthesize() draws for a stream.
EditType planned_edit_type(const GenerationPlan& plan, RngState seed);

nlohmann::json to_json(const BinOrShape& where);
BinOrShape bin_or_shape_from_json(const nlohmann::json& j);

/// "fox" -> "foxes", "cat" -> "cats".
std::string pluralize(std::string_view noun);

}  // namespace collagen
