#include "collagen/dataset_io.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "collagen/media_io.hpp"

namespace collagen {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kPendingDir = "pending";
constexpr std::string_view kFramesSuffix = ".frames.json";
constexpr std::size_t kHashPrefix = 16;

std::string pending_name(std::uint64_t stream_id) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%012llu.json", static_cast<unsigned long long>(stream_id));
    return buf;
}

std::string dump_line(const json& j) { return j.dump() + "\n"; }

std::vector<json> parse_lines(const std::string& text, const std::string& what) {
    std::vector<json> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        if (end > pos) {
            auto j = json::parse(text.substr(pos, end - pos), nullptr, false);
            if (j.is_discarded()) throw Error("malformed line in " + what);
            out.push_back(std::move(j));
        }
        pos = end + 1;
    }
    return out;
}

Extent png_extent(std::span<const std::uint8_t> bytes) {
    static constexpr std::uint8_t kSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (bytes.size() < 24 || !std::equal(kSig, kSig + 8, bytes.begin())) throw Error("not a PNG file");
    const auto be32 = [&](std::size_t at) {
        return static_cast<int>((std::uint32_t{bytes[at]} << 24) | (std::uint32_t{bytes[at + 1]} << 16) |
                                (std::uint32_t{bytes[at + 2]} << 8) | std::uint32_t{bytes[at + 3]});
    };
    return {be32(16), be32(20)};
}

std::string hash_stem(const fs::path& file) {
    const auto name = file.filename().string();
    return name.substr(0, std::min(name.size(), kHashPrefix));
}

}  // namespace

std::string shard_dir_name(int shard_id) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%05d", shard_id);
    return buf;
}

fs::path shard_path(const fs::path& root, int shard_id) { return root / "shards" / shard_dir_name(shard_id); }

std::vector<ShardPlan> range_shards(std::uint64_t count, int shard_size) {
    if (shard_size <= 0) throw Error("shard size must be positive");
    std::vector<ShardPlan> plans;
    for (std::uint64_t first = 0; first < count; first += static_cast<std::uint64_t>(shard_size)) {
        ShardPlan plan{static_cast<int>(plans.size()), {}};
        const auto end = std::min(count, first + static_cast<std::uint64_t>(shard_size));
        for (auto id = first; id < end; ++id) plan.stream_ids.push_back(id);
        plans.push_back(std::move(plan));
    }
    return plans;
}

json to_json(const ShardSummary& s) {
    return {{"shard_id", s.shard_id},
            {"samples", s.samples},
            {"rejections", s.rejections},
            {"manifest_digest", s.manifest_digest},
            {"rejections_digest", s.rejections_digest},
            {"sample_ids", s.sample_ids}};
}

ShardSummary shard_summary_from_json(const json& j) {
    return {j.at("shard_id").get<int>(),
            j.at("samples").get<std::uint64_t>(),
            j.at("rejections").get<std::uint64_t>(),
            j.at("manifest_digest").get<std::string>(),
            j.at("rejections_digest").get<std::string>(),
            j.at("sample_ids").get<std::vector<std::string>>()};
}

json load_json_file(const fs::path& path) {
    const auto text = read_text_file(path);
    auto j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw Error("malformed JSON in " + path.string());
    return j;
}

void write_json_file(const fs::path& path, const json& value) { write_file_atomic(path, value.dump(2) + "\n"); }

ShardWriter::ShardWriter(fs::path root, ShardPlan plan)
    : root_(std::move(root)), plan_(std::move(plan)), ids_(plan_.stream_ids.begin(), plan_.stream_ids.end()) {
    if (ids_.size() != plan_.stream_ids.size()) throw Error("shard plan lists a stream id twice");
}

fs::path ShardWriter::directory() const { return shard_path(root_, plan_.shard_id); }

bool ShardWriter::closed() const { return fs::exists(directory() / kShardSummaryFile); }

fs::path ShardWriter::pending_path(std::uint64_t stream_id) const {
    return directory() / kPendingDir / pending_name(stream_id);
}

void ShardWriter::claim(std::uint64_t stream_id) const {
    if (!ids_.count(stream_id)) throw Error("stream id " + std::to_string(stream_id) + " is outside the shard");
    if (closed()) throw Error("shard " + shard_dir_name(plan_.shard_id) + " is closed");
    if (fs::exists(pending_path(stream_id))) {
        throw Error("stream id " + std::to_string(stream_id) + " already written");
    }
    fs::create_directories(directory() / kPendingDir);
}

std::string ShardWriter::store_media(const RgbImage& frame) const {
    const auto png = encode_png(frame);
    const auto name = sha256_hex(png).substr(0, kHashPrefix) + ".png";
    const auto path = directory() / name;
    if (!fs::exists(path)) write_file_atomic(path, png);
    return name;
}

std::string ShardWriter::store_frames(const Frames& frames) const {
    if (frames.size() == 1) return store_media(frames.front());
    json list = json::array();
    for (const auto& f : frames) list.push_back(store_media(f));
    const auto text = json{{"frames", list}}.dump() + "\n";
    const auto name = sha256_hex(text).substr(0, kHashPrefix) + std::string(kFramesSuffix);
    const auto path = directory() / name;
    if (!fs::exists(path)) write_file_atomic(path, text);
    return name;
}

json ShardWriter::write_sample(const EditSample& sample, std::uint64_t stream_id, std::uint64_t global_seed,
                               const GateResult& gate) {
    claim(stream_id);
    const auto rel = fs::path("shards") / shard_dir_name(plan_.shard_id);
    json gate_json = {{"ssim", gate.ssim.composite}};
    if (gate.ssim.frame_scores) gate_json["frame_scores"] = *gate.ssim.frame_scores;
    json verdicts = json::array();
    for (const auto& v : gate.verdicts) verdicts.push_back(v.pass);
    gate_json["judge"] = verdicts;

    json record = {{"sample_id", sample.sample_id},
                   {"edit_type", to_string(sample.edit_type)},
                   {"instruction", sample.instruction},
                   {"source_path", (rel / store_frames(sample.source)).generic_string()},
                   {"target_path", (rel / store_frames(sample.target)).generic_string()},
                   {"seed", global_seed},
                   {"stream_id", stream_id},
                   {"bin_or_shape", to_json(sample.bin_or_shape)},
                   {"provenance", sample.provenance},
                   {"gate", gate_json}};
    write_file_atomic(pending_path(stream_id), json{{"stream_id", stream_id}, {"accepted", record}}.dump());
    return record;
}

void ShardWriter::write_rejection(std::uint64_t stream_id, const Rejection& rejection, EditType type) {
    claim(stream_id);
    auto j = to_json(rejection);
    j["edit_type"] = to_string(type);
    j["stream_id"] = stream_id;
    write_file_atomic(pending_path(stream_id), json{{"stream_id", stream_id}, {"rejected", j}}.dump());
}

std::set<std::uint64_t> ShardWriter::written() const {
    std::set<std::uint64_t> out;
    const auto dir = directory() / kPendingDir;
    if (!fs::exists(dir)) return out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (name.starts_with(".") || entry.path().extension() != ".json") continue;
        const auto id = std::stoull(entry.path().stem().string());
        if (ids_.count(id)) out.insert(id);
    }
    return out;
}

ShardSummary ShardWriter::close() {
    const auto dir = directory();
    if (closed()) return shard_summary_from_json(load_json_file(dir / kShardSummaryFile));
    if (!complete()) throw Error("shard " + shard_dir_name(plan_.shard_id) + " is incomplete");

    std::string manifest;
    std::string rejections;
    ShardSummary summary;
    summary.shard_id = plan_.shard_id;
    for (auto id : written()) {
        const auto pending = load_json_file(pending_path(id));
        if (pending.contains("accepted")) {
            manifest += dump_line(pending["accepted"]);
            summary.sample_ids.push_back(pending["accepted"].at("sample_id").get<std::string>());
            ++summary.samples;
        } else {
            rejections += dump_line(pending.at("rejected"));
            ++summary.rejections;
        }
    }
    summary.manifest_digest = sha256_hex(manifest);
    summary.rejections_digest = sha256_hex(rejections);
    write_file_atomic(dir / kShardManifestFile, manifest);
    write_file_atomic(dir / kShardRejectionsFile, rejections);
    write_json_file(dir / kShardSummaryFile, to_json(summary));
    fs::remove_all(dir / kPendingDir);
    return summary;
}

namespace {

Frames read_frames(const fs::path& root, const std::string& rel) {
    const auto path = root / rel;
    if (rel.ends_with(kFramesSuffix)) {
        Frames frames;
        const auto list = load_json_file(path);
        for (const auto& name : list.at("frames")) {
            frames.push_back(decode_png_rgb(read_file(path.parent_path() / name.get<std::string>())));
        }
        return frames;
    }
    return {decode_png_rgb(read_file(path))};
}

std::vector<json> read_shard_lines(const fs::path& root, std::string_view file) {
    std::vector<json> out;
    const auto manifest = load_json_file(root / kManifestFile);
    for (const auto& shard : manifest.at("shards")) {
        const auto path = root / shard.at("path").get<std::string>() / file;
        auto lines = parse_lines(read_text_file(path), path.string());
        out.insert(out.end(), std::make_move_iterator(lines.begin()), std::make_move_iterator(lines.end()));
    }
    return out;
}

}  // namespace

EditSample read_sample(const fs::path& root, const json& record) {
    EditSample s;
    s.sample_id = record.at("sample_id").get<std::string>();
    s.edit_type = edit_type_from_string(record.at("edit_type").get<std::string>());
    s.instruction = record.at("instruction").get<std::string>();
    s.source = read_frames(root, record.at("source_path").get<std::string>());
    s.target = read_frames(root, record.at("target_path").get<std::string>());
    s.seed = {record.at("seed").get<std::uint64_t>(), record.at("stream_id").get<std::uint64_t>()};
    s.bin_or_shape = bin_or_shape_from_json(record.at("bin_or_shape"));
    record.at("provenance").get_to(s.provenance);
    return s;
}

std::vector<json> read_records(const fs::path& root) { return read_shard_lines(root, kShardManifestFile); }
std::vector<json> read_rejections(const fs::path& root) { return read_shard_lines(root, kShardRejectionsFile); }

void init_or_check_config(const fs::path& root, const json& snapshot) {
    const auto path = root / kConfigFile;
    if (fs::exists(path)) {
        if (load_json_file(path) != snapshot) throw Error("config drift");
        return;
    }
    fs::create_directories(root / "shards");
    write_json_file(path, snapshot);
}

std::vector<std::uint64_t> resume_plan(const fs::path& root, const json& snapshot, const std::vector<ShardPlan>& plans) {
    const auto path = root / kConfigFile;
    if (!fs::exists(path)) throw Error("not a dataset: missing " + path.string());
    if (load_json_file(path) != snapshot) throw Error("config drift");
    std::vector<std::uint64_t> todo;
    for (const auto& plan : plans) {
        ShardWriter writer(root, plan);
        if (writer.closed()) continue;
        const auto done = writer.written();
        for (auto id : done) {
            const auto record = load_json_file(writer.directory() / kPendingDir / pending_name(id));
            if (record.value("stream_id", ~std::uint64_t{0}) != id) throw Error("corrupted pending record");
        }
        for (auto id : plan.stream_ids) {
            if (!done.count(id)) todo.push_back(id);
        }
    }
    return todo;
}

json finalize_manifest(const fs::path& root, const std::vector<ShardPlan>& plans) {
    const auto config = load_json_file(root / kConfigFile);
    json shards = json::array();
    std::map<std::string, std::uint64_t> counts;
    std::map<std::string, std::uint64_t> stages;
    std::uint64_t total = 0, rejected = 0, deferred = 0;
    for (const auto& plan : plans) {
        const auto dir = shard_path(root, plan.shard_id);
        if (!fs::exists(dir / kShardSummaryFile)) throw Error("shard " + shard_dir_name(plan.shard_id) + " is not closed");
        const auto summary = shard_summary_from_json(load_json_file(dir / kShardSummaryFile));
        for (const auto& r : parse_lines(read_text_file(dir / kShardManifestFile), "shard manifest")) {
            ++counts[r.at("edit_type").get<std::string>()];
        }
        for (const auto& r : parse_lines(read_text_file(dir / kShardRejectionsFile), "rejection log")) {
            ++stages[r.at("stage").get<std::string>()];
            if (r.value("deferred", false)) ++deferred;
        }
        total += summary.samples;
        rejected += summary.rejections;
        json entry = {{"id", plan.shard_id},
                      {"path", (fs::path("shards") / shard_dir_name(plan.shard_id)).generic_string()},
                      {"samples", summary.samples},
                      {"rejections", summary.rejections},
                      {"manifest_digest", summary.manifest_digest}};
        if (!plan.stream_ids.empty()) {
            entry["first_stream"] = plan.stream_ids.front();
            entry["last_stream"] = plan.stream_ids.back();
        }
        shards.push_back(std::move(entry));
    }
    const auto candidates = total + rejected;
    json manifest = {{"format", kDatasetFormat},
                     {"version", kDatasetVersion},
                     {"seed", config.value("seed", json())},
                     {"config", config},
                     {"shards", shards},
                     {"counts", counts},
                     {"total", total},
                     {"acceptance",
                      {{"candidates", candidates},
                       {"accepted", total},
                       {"rejected", rejected},
                       {"deferred", deferred},
                       {"by_stage", stages},
                       {"rate", candidates ? static_cast<double>(total) / static_cast<double>(candidates) : 0.0}}}};
    write_json_file(root / kManifestFile, manifest);
    return manifest;
}

json to_json(const VerifyReport& report) {
    json violations = json::array();
    for (const auto& v : report.violations) {
        violations.push_back({{"kind", v.kind}, {"path", v.path}, {"detail", v.detail}});
    }
    return {{"ok", report.ok()},
            {"records", report.records},
            {"files", report.files},
            {"replayed", report.replayed},
            {"violations", violations}};
}

VerifyReport verify_dataset(const fs::path& root, const AssetStore* store, std::uint64_t replay_every) {
    VerifyReport report;
    const auto manifest_path = root / kManifestFile;
    if (!fs::exists(manifest_path)) throw Error("missing manifest: " + manifest_path.string());
    const auto manifest = load_json_file(manifest_path);
    const auto add = [&](std::string kind, std::string path, std::string detail) {
        report.violations.push_back({std::move(kind), std::move(path), std::move(detail)});
    };

    if (!fs::exists(root / kConfigFile)) {
        add("missing", std::string(kConfigFile), "config snapshot missing");
    } else if (load_json_file(root / kConfigFile) != manifest.at("config")) {
        add("record", std::string(kConfigFile), "config snapshot differs from manifest");
    }

    std::map<std::string, bool> file_ok;      // relative path -> digest verified
    std::map<std::string, Extent> png_dims;
    const auto check_file = [&](const std::string& rel) -> bool {
        if (const auto it = file_ok.find(rel); it != file_ok.end()) return it->second;
        ++report.files;
        const auto path = root / rel;
        bool ok = false;
        if (!fs::exists(path)) {
            add("missing", rel, "media file missing");
        } else {
            const auto bytes = read_file(path);
            if (sha256_hex(bytes).substr(0, kHashPrefix) != hash_stem(path)) {
                add("digest", rel, "content hash does not match file name");
            } else {
                ok = true;
                if (rel.ends_with(".png")) {
                    try {
                        png_dims[rel] = png_extent(bytes);
                    } catch (const Error& e) {
                        add("record", rel, e.what());
                        ok = false;
                    }
                }
            }
        }
        file_ok[rel] = ok;
        return ok;
    };

    // Checks one media reference; returns false when anything is off.
    const auto check_media = [&](const std::string& rel, Extent size, int frame_count) -> bool {
        if (!check_file(rel)) return false;
        std::vector<std::string> frames;
        if (rel.ends_with(kFramesSuffix)) {
            const auto base = fs::path(rel).parent_path();
            const auto list = load_json_file(root / rel);
            for (const auto& name : list.at("frames")) {
                frames.push_back((base / name.get<std::string>()).generic_string());
            }
        } else {
            frames.push_back(rel);
        }
        if (static_cast<int>(frames.size()) != frame_count) {
            add("dimension", rel, "expected " + std::to_string(frame_count) + " frames, found " + std::to_string(frames.size()));
            return false;
        }
        bool ok = true;
        for (const auto& f : frames) {
            if (!check_file(f)) {
                ok = false;
                continue;
            }
            const auto dims = png_dims.at(f);
            if (dims != size) {
                add("dimension", f,
                    "expected " + std::to_string(size.width) + "x" + std::to_string(size.height) + ", found " +
                        std::to_string(dims.width) + "x" + std::to_string(dims.height));
                ok = false;
            }
        }
        return ok;
    };

    std::uint64_t total = 0;
    std::set<std::string> seen_ids;
    std::uint64_t index = 0;
    for (const auto& shard : manifest.at("shards")) {
        const auto rel_dir = shard.at("path").get<std::string>();
        const auto dir = root / rel_dir;
        if (!fs::exists(dir / kShardSummaryFile)) {
            add("missing", rel_dir + "/" + std::string(kShardSummaryFile), "shard summary missing");
            continue;
        }
        const auto summary = shard_summary_from_json(load_json_file(dir / kShardSummaryFile));
        const auto manifest_rel = rel_dir + "/" + std::string(kShardManifestFile);
        if (!fs::exists(dir / kShardManifestFile)) {
            add("missing", manifest_rel, "shard manifest missing");
            continue;
        }
        const auto text = read_text_file(dir / kShardManifestFile);
        if (sha256_hex(text) != summary.manifest_digest || shard.at("manifest_digest") != summary.manifest_digest) {
            add("digest", manifest_rel, "manifest digest mismatch");
        }
        const auto rejections_rel = rel_dir + "/" + std::string(kShardRejectionsFile);
        if (!fs::exists(dir / kShardRejectionsFile) ||
            sha256_hex(read_text_file(dir / kShardRejectionsFile)) != summary.rejections_digest) {
            add("digest", rejections_rel, "rejection log digest mismatch");
        }

        std::vector<json> records;
        try {
            records = parse_lines(text, manifest_rel);
        } catch (const Error& e) {
            add("record", manifest_rel, e.what());
            continue;
        }
        if (records.size() != summary.samples || shard.at("samples").get<std::uint64_t>() != summary.samples) {
            add("count", manifest_rel,
                "expected " + std::to_string(summary.samples) + " records, found " + std::to_string(records.size()));
        }
        total += records.size();

        for (const auto& record : records) {
            ++report.records;
            const auto this_index = index++;
            try {
                const auto id = record.at("sample_id").get<std::string>();
                if (!seen_ids.insert(id).second) add("record", manifest_rel, "sample " + id + " appears twice");
                const auto where = bin_or_shape_from_json(record.at("bin_or_shape"));
                const auto size = std::visit([](const auto& v) { return v.extent(); }, where);
                const int frames = std::holds_alternative<VideoShape>(where) ? std::get<VideoShape>(where).frame_count : 1;
                bool ok = check_media(record.at("source_path").get<std::string>(), size, frames);
                ok = check_media(record.at("target_path").get<std::string>(), size, frames) && ok;
                if (ok && store && replay_every > 0 && this_index % replay_every == 0) {
                    const auto stored = read_sample(root, record);
                    const auto replayed = realize(stored.provenance, *store);
                    ++report.replayed;
                    if (replayed.source != stored.source || replayed.target != stored.target ||
                        replayed.instruction != stored.instruction) {
                        add("replay", record.at("source_path").get<std::string>(), "sample " + id + " does not replay");
                    }
                }
            } catch (const std::exception& e) {
                add("record", manifest_rel, e.what());
            }
        }
    }
    if (total != manifest.at("total").get<std::uint64_t>()) {
        add("count", std::string(kManifestFile),
            "manifest total " + std::to_string(manifest.at("total").get<std::uint64_t>()) + " but shards hold " +
                std::to_string(total));
    }
    return report;
}

json dataset_stats(const fs::path& root) {
    const auto manifest = load_json_file(root / kManifestFile);
    std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> per_type;
    std::map<std::string, std::uint64_t> stages;
    std::uint64_t accepted = 0, rejected = 0;
    for (const auto& r : read_records(root)) {
        ++per_type[r.at("edit_type").get<std::string>()].first;
        ++accepted;
    }
    for (const auto& r : read_rejections(root)) {
        ++per_type[r.value("edit_type", std::string("unknown"))].second;
        ++stages[r.at("stage").get<std::string>()];
        ++rejected;
    }
    json types = json::object();
    for (const auto& [type, c] : per_type) {
        const auto candidates = c.first + c.second;
        types[type] = {{"accepted", c.first},
                       {"rejected", c.second},
                       {"acceptance_rate", candidates ? static_cast<double>(c.first) / static_cast<double>(candidates) : 0.0}};
    }
    const auto total = manifest.at("total").get<std::uint64_t>();
    return {{"total", accepted},
            {"manifest_total", total},
            {"reconciled", accepted == total},
            {"candidates", accepted + rejected},
            {"rejected", rejected},
            {"rejected_by_stage", stages},
            {"acceptance_rate", accepted + rejected ? static_cast<double>(accepted) / static_cast<double>(accepted + rejected) : 0.0},
            {"per_type", types}};
}

}  // namespace collagen
