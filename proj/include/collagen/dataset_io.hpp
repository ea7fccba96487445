#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "collagen/asset_store.hpp"
#include "collagen/edit_synth.hpp"
#include "collagen/quality_gate.hpp"

namespace collagen {

// Layout:
//   root/config.json                 run-config snapshot, written first
//   root/manifest.json               global manifest, written once at the end
//   root/shards/NNNNN/shard.json     shard summary; its presence marks a closed shard
//   root/shards/NNNNN/manifest.jsonl accepted records, ordered by stream id
//   root/shards/NNNNN/rejections.jsonl
//   root/shards/NNNNN/<hash>.png     content-addressed media
//   root/shards/NNNNN/pending/       one file per processed stream id until close

inline constexpr std::string_view kDatasetFormat = "collagen.dataset";
inline constexpr int kDatasetVersion = 1;
inline constexpr std::string_view kConfigFile = "config.json";
inline constexpr std::string_view kManifestFile = "manifest.json";
inline constexpr std::string_view kShardSummaryFile = "shard.json";
inline constexpr std::string_view kShardManifestFile = "manifest.jsonl";
inline constexpr std::string_view kShardRejectionsFile = "rejections.jsonl";

std::string shard_dir_name(int shard_id);
std::filesystem::path shard_path(const std::filesystem::path& root, int shard_id);

/// Stream ids a shard is responsible for.
struct ShardPlan {
    int shard_id = 0;
    std::vector<std::uint64_t> stream_ids;
};

/// Contiguous ranges of `shard_size` ids covering [0, count).
std::vector<ShardPlan> range_shards(std::uint64_t count, int shard_size);

struct ShardSummary {
    int shard_id = 0;
    std::uint64_t samples = 0;
    std::uint64_t rejections = 0;
    std::string manifest_digest;
    std::string rejections_digest;
    std::vector<std::string> sample_ids;
};

nlohmann::json to_json(const ShardSummary& summary);
ShardSummary shard_summary_from_json(const nlohmann::json& j);

/// Writes the records of one shard. Every write is a temp file plus rename,
/// so a crash leaves each record either absent or complete. Concurrent
/// writers for distinct stream ids are safe.
class ShardWriter {
public:
    ShardWriter(std::filesystem::path root, ShardPlan plan);

    const ShardPlan& plan() const { return plan_; }
    std::filesystem::path directory() const;
    bool closed() const;

    /// Writes media and the pending record; returns the record. Throws when
    /// the id is outside the shard, already written, or the shard is closed.
    nlohmann::json write_sample(const EditSample& sample, std::uint64_t stream_id, std::uint64_t global_seed,
                                const GateResult& gate);
    void write_rejection(std::uint64_t stream_id, const Rejection& rejection, EditType type);

    /// Stream ids with a pending record.
    std::set<std::uint64_t> written() const;
    bool complete() const { return written().size() == plan_.stream_ids.size(); }

    /// Sorts pending records into the shard manifests and writes shard.json.
    ShardSummary close();

private:
    std::filesystem::path pending_path(std::uint64_t stream_id) const;
    void claim(std::uint64_t stream_id) const;
    std::string store_media(const RgbImage& frame) const;
    std::string store_frames(const Frames& frames) const;

    std::filesystem::path root_;
    ShardPlan plan_;
    std::set<std::uint64_t> ids_;
};

/// Reads a record's media back into a sample.
EditSample read_sample(const std::filesystem::path& root, const nlohmann::json& record);

/// Accepted records of every closed shard, in shard order.
std::vector<nlohmann::json> read_records(const std::filesystem::path& root);
std::vector<nlohmann::json> read_rejections(const std::filesystem::path& root);

nlohmann::json load_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& value);

/// Writes config.json for a fresh dataset, or checks an existing one.
/// Throws Error("config drift") when they differ.
void init_or_check_config(const std::filesystem::path& root, const nlohmann::json& snapshot);

/// Stream ids of `plans` without a record yet. Requires a matching config
/// snapshot; unreadable pending records are fatal.
std::vector<std::uint64_t> resume_plan(const std::filesystem::path& root, const nlohmann::json& snapshot,
                                       const std::vector<ShardPlan>& plans);

/// Writes manifest.json from the closed shards.
nlohmann::json finalize_manifest(const std::filesystem::path& root, const std::vector<ShardPlan>& plans);

struct Violation {
    std::string kind;  ///< digest, count, dimension, missing, replay, record
    std::string path;
    std::string detail;
};

struct VerifyReport {
    std::vector<Violation> violations;
    std::uint64_t records = 0;
    std::uint64_t files = 0;
    std::uint64_t replayed = 0;

    bool ok() const { return violations.empty(); }
};

nlohmann::json to_json(const VerifyReport& report);

/// Checks digests, counts and dimensions; with a store, additionally
/// replays every `replay_every`-th record from its provenance.
VerifyReport verify_dataset(const std::filesystem::path& root, const AssetStore* store = nullptr,
                            std::uint64_t replay_every = 0);

/// Per-type counts and acceptance rates derived from shard manifests.
nlohmann::json dataset_stats(const std::filesystem::path& root);

}  // namespace collagen
