#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include <json.hpp>

#include "collagen/asset_store.hpp"
#include "collagen/dataset_io.hpp"
#include "collagen/edit_synth.hpp"
#include "collagen/mixref.hpp"
#include "collagen/quality_gate.hpp"

namespace collagen {

enum class SynthMode { image, video };

inline constexpr int kDefaultShardSize = 1000;

struct RunConfig {
    std::filesystem::path store;
    std::filesystem::path out;
    std::uint64_t seed = 0;
    std::uint64_t count = 0;
    SynthMode mode = SynthMode::image;
    EditMix mix;  ///< empty means the mode's default mix
    int workers = 1;
    int shard_size = kDefaultShardSize;
    std::optional<AspectBin> bin;
    std::optional<VideoShape> video_shape;
    SynthConfig synth;
    GateConfig gate;
    std::string judge = "stub";
    mixref::MixingConfig mixing;
    /// Stop claiming work after this many stream ids (interrupt simulation).
    std::optional<std::uint64_t> stop_after;
};

GenerationPlan generation_plan(const RunConfig& config);

/// Everything that determines the dataset bytes. Worker count, output path
/// and stop_after are excluded; the store enters through its index digest.
nlohmann::json config_snapshot(const RunConfig& config, const AssetIndex& index);

struct Progress {
    std::uint64_t processed = 0;  ///< this run
    std::uint64_t accepted = 0;
    std::uint64_t rejected = 0;
    std::uint64_t remaining = 0;  ///< at the start of this run
};

using ProgressFn = std::function<void(const Progress&)>;

struct RunSummary {
    bool complete = false;  ///< every shard closed and manifest.json written
    Progress progress;
    nlohmann::json manifest;  ///< null unless complete
};

/// Generates (or resumes) a dataset. Setting `*stop` makes workers finish
/// their current stream id and return; closed shards stay closed and
/// pending records are picked up by the next run.
RunSummary run_generation(const RunConfig& config, const AssetStore& store, JudgeClient& judge,
                          const std::atomic<bool>* stop = nullptr, const ProgressFn& progress = {});

struct FilterConfig {
    std::filesystem::path input;
    std::filesystem::path out;
    GateConfig gate;
    std::string judge = "stub";
    int workers = 1;
};

/// Re-gates every accepted record of `input` into a new dataset at `out`,
/// keeping shard boundaries and stream ids.
RunSummary run_filter(const FilterConfig& config, JudgeClient& judge, const std::atomic<bool>* stop = nullptr,
                      const ProgressFn& progress = {});

}  // namespace collagen
