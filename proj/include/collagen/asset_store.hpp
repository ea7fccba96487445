#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "collagen/image.hpp"
#include "collagen/rng.hpp"

namespace collagen {

enum class AssetKind { fg_image, bg_image, fg_clip, bg_clip };

std::string_view to_string(AssetKind kind);
AssetKind asset_kind_from_string(std::string_view text);

/// A matted cutout: alpha has at least one zero and one non-zero sample.
struct ForegroundAsset {
    std::string id;
    RgbaImage pixels;
    std::string caption_brief;
    std::string caption_detailed;
    double segmentation_confidence = 1.0;
};

struct BackgroundAsset {
    std::string id;
    RgbImage pixels;
    std::string caption_brief;
};

/// Frame sequence. Foreground clips keep a per-frame matte in `matted`;
/// background clips use `frames`.
struct VideoClipAsset {
    std::string id;
    AssetKind role = AssetKind::bg_clip;
    std::vector<RgbImage> frames;
    std::vector<RgbaImage> matted;
    std::string caption_brief;
    std::string caption_detailed;

    int frame_count() const {
        return static_cast<int>(role == AssetKind::fg_clip ? matted.size() : frames.size());
    }
    Extent extent() const;
};

struct AssetRecord {
    std::string id;
    AssetKind kind = AssetKind::fg_image;
    std::string path;  ///< relative to the store root
    std::string caption_brief;
    std::string caption_detailed;
    double confidence = 1.0;
    int width = 0;
    int height = 0;
    int frame_count = 1;

    Extent extent() const { return {width, height}; }
    friend bool operator==(const AssetRecord&, const AssetRecord&) = default;
};

struct IngestRejection {
    int line = 0;  ///< 1-based manifest line
    std::string id;
    std::string reason;

    friend bool operator==(const IngestRejection&, const IngestRejection&) = default;
};

/// Validated view of the material database. Immutable after ingest.
struct AssetIndex {
    std::filesystem::path root;
    std::map<std::string, AssetRecord> entries;
    std::vector<IngestRejection> rejected;

    const AssetRecord& at(std::string_view id) const;
    bool contains(std::string_view id) const { return entries.find(std::string(id)) != entries.end(); }
    std::size_t count(AssetKind kind) const;
    /// Ids of one kind in lexicographic order.
    std::vector<std::string> ids(AssetKind kind) const;
};

inline constexpr std::string_view kIndexFileName = "index.json";
inline constexpr std::string_view kIndexFormat = "collagen.asset-index";
inline constexpr int kIndexVersion = 1;

struct IngestOptions {
    double min_confidence = 0.9;
};

/// Reads a line-delimited JSON manifest, validates every record, and
/// persists the resulting index as index.json beside the manifest.
/// Unreadable manifests, malformed lines and duplicate ids are fatal;
/// undecodable or invariant-violating media are skipped and reported.
AssetIndex ingest(const std::filesystem::path& manifest_path, const IngestOptions& options = {});

std::string serialize_index(const AssetIndex& index);
AssetIndex parse_index(std::string_view text, const std::filesystem::path& root);
void save_index(const AssetIndex& index);
AssetIndex load_index(const std::filesystem::path& root);

/// Uniform draw among assets of one kind (ordered by id).
/// Throws Error("exhausted asset kind") when the pool is empty.
const AssetRecord& sample_asset(const AssetIndex& index, AssetKind kind, Rng& rng);

/// Same, restricted to records accepted by `keep`.
template <typename Pred>
const AssetRecord& sample_asset_if(const AssetIndex& index, AssetKind kind, Rng& rng, Pred keep) {
    std::vector<const AssetRecord*> pool;
    for (const auto& [id, rec] : index.entries) {
        if (rec.kind == kind && keep(rec)) pool.push_back(&rec);
    }
    if (pool.empty()) throw Error("exhausted asset kind: " + std::string(to_string(kind)));
    return *pool[rng.below(pool.size())];
}

/// An index plus decoded media, loaded on first use and shared read-only.
class AssetStore {
public:
    explicit AssetStore(AssetIndex index) : index_(std::move(index)) {}
    static AssetStore open(const std::filesystem::path& root) { return AssetStore(load_index(root)); }

    AssetStore(const AssetStore&) = delete;
    AssetStore& operator=(const AssetStore&) = delete;
    AssetStore(AssetStore&& other) noexcept : index_(std::move(other.index_)) {}

    const AssetIndex& index() const { return index_; }

    std::shared_ptr<const ForegroundAsset> foreground(std::string_view id) const;
    std::shared_ptr<const BackgroundAsset> background(std::string_view id) const;
    std::shared_ptr<const VideoClipAsset> clip(std::string_view id) const;

private:
    AssetIndex index_;
    mutable std::mutex mutex_;
    mutable std::map<std::string, std::shared_ptr<const ForegroundAsset>, std::less<>> fg_;
    mutable std::map<std::string, std::shared_ptr<const BackgroundAsset>, std::less<>> bg_;
    mutable std::map<std::string, std::shared_ptr<const VideoClipAsset>, std::less<>> clips_;
};

/// Media loaders used by ingest and the store; throw Error on decode or
/// invariant failure.
ForegroundAsset load_foreground(const std::filesystem::path& file, const AssetRecord& record);
BackgroundAsset load_background(const std::filesystem::path& file, const AssetRecord& record);
VideoClipAsset load_clip(const std::filesystem::path& dir, const AssetRecord& record);

/// Zero-padded frame file name inside a clip directory ("00012.png").
std::string clip_frame_name(int frame);
inline constexpr std::string_view kClipMetaName = "clip.json";

}  // namespace collagen
