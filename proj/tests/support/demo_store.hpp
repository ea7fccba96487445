#pragma once

#include <cstdint>
#include <filesystem>

namespace collagen::demo {

struct DemoStoreOptions {
    int foregrounds = 12;
    int backgrounds = 6;
    int fg_clips = 3;
    int bg_clips = 2;
    int bg_clip_frames = 90;
    std::uint64_t seed = 1;
};

/// Writes procedurally drawn assets and a manifest.jsonl into `dir`;
/// returns the manifest path. Ingest it to obtain a store.
std::filesystem::path write_demo_store(const std::filesystem::path& dir, const DemoStoreOptions& options = {});

}  // namespace collagen::demo
