#include "collagen/asset_store.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "collagen/media_io.hpp"

namespace collagen {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(AssetKind kind) {
    switch (kind) {
        case AssetKind::fg_image: return "fg_image";
        case AssetKind::bg_image: return "bg_image";
        case AssetKind::fg_clip: return "fg_clip";
        case AssetKind::bg_clip: return "bg_clip";
    }
    return "?";
}

AssetKind asset_kind_from_string(std::string_view text) {
    if (text == "fg_image") return AssetKind::fg_image;
    if (text == "bg_image") return AssetKind::bg_image;
    if (text == "fg_clip") return AssetKind::fg_clip;
    if (text == "bg_clip") return AssetKind::bg_clip;
    throw Error("unknown asset kind '" + std::string(text) + "'");
}

Extent VideoClipAsset::extent() const {
    if (role == AssetKind::fg_clip) return matted.empty() ? Extent{} : matted.front().extent();
    return frames.empty() ? Extent{} : frames.front().extent();
}

const AssetRecord& AssetIndex::at(std::string_view id) const {
    auto it = entries.find(std::string(id));
    if (it == entries.end()) throw Error("missing asset '" + std::string(id) + "'");
    return it->second;
}

std::size_t AssetIndex::count(AssetKind kind) const {
    return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(),
                                                  [&](const auto& e) { return e.second.kind == kind; }));
}

std::vector<std::string> AssetIndex::ids(AssetKind kind) const {
    std::vector<std::string> out;
    for (const auto& [id, rec] : entries) {
        if (rec.kind == kind) out.push_back(id);
    }
    return out;
}

std::string clip_frame_name(int frame) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%05d.png", frame);
    return buf;
}

namespace {

bool is_matte(const RgbaImage& image, bool require_opaque) {
    bool any_zero = false;
    bool any_set = false;
    for (const auto& px : image.pixels()) {
        if (px.a == 0) {
            any_zero = true;
        } else {
            any_set = true;
        }
        if (any_zero && any_set) return true;
    }
    return any_zero && (any_set || !require_opaque);
}

int clip_frame_count(const fs::path& dir) {
    const auto meta = json::parse(read_text_file(dir / kClipMetaName));
    const int n = meta.at("frame_count").get<int>();
    if (n <= 0) throw Error("clip metadata has no frames");
    return n;
}

}  // namespace

ForegroundAsset load_foreground(const fs::path& file, const AssetRecord& record) {
    auto pixels = decode_png_rgba(read_file(file));
    if (!is_matte(pixels, true)) throw Error("not a matte");
    return {record.id, std::move(pixels), record.caption_brief, record.caption_detailed, record.confidence};
}

BackgroundAsset load_background(const fs::path& file, const AssetRecord& record) {
    auto pixels = decode_png_rgb(read_file(file));
    if (pixels.width() < 256 || pixels.height() < 256) throw Error("background smaller than 256x256");
    return {record.id, std::move(pixels), record.caption_brief};
}

VideoClipAsset load_clip(const fs::path& dir, const AssetRecord& record) {
    VideoClipAsset clip;
    clip.id = record.id;
    clip.role = record.kind;
    clip.caption_brief = record.caption_brief;
    clip.caption_detailed = record.caption_detailed;
    const int n = clip_frame_count(dir);
    bool any_opaque = false;
    for (int i = 0; i < n; ++i) {
        const auto bytes = read_file(dir / clip_frame_name(i));
        if (record.kind == AssetKind::fg_clip) {
            auto frame = decode_png_rgba(bytes);
            if (!is_matte(frame, false)) throw Error("frame " + std::to_string(i) + " is not a matte");
            any_opaque = any_opaque || is_matte(frame, true);
            if (!clip.matted.empty() && frame.extent() != clip.matted.front().extent()) {
                throw Error("clip frames differ in size");
            }
            clip.matted.push_back(std::move(frame));
        } else {
            auto frame = decode_png_rgb(bytes);
            if (!clip.frames.empty() && frame.extent() != clip.frames.front().extent()) {
                throw Error("clip frames differ in size");
            }
            clip.frames.push_back(std::move(frame));
        }
    }
    if (record.kind == AssetKind::fg_clip && !any_opaque) throw Error("not a matte");
    if (record.kind == AssetKind::bg_clip && n < 73) throw Error("background clip shorter than 73 frames");
    return clip;
}

namespace {

AssetRecord record_from_manifest(const json& line) {
    AssetRecord rec;
    rec.id = line.at("id").get<std::string>();
    rec.kind = asset_kind_from_string(line.at("kind").get<std::string>());
    rec.path = line.at("path").get<std::string>();
    rec.caption_brief = line.value("caption_brief", std::string{});
    rec.caption_detailed = line.value("caption_detailed", std::string{});
    rec.confidence = line.value("confidence", 1.0);
    return rec;
}

void check_record(const AssetRecord& rec, const IngestOptions& options) {
    if (rec.id.empty()) throw Error("empty id");
    if (rec.caption_brief.empty()) throw Error("missing caption_brief");
    if (rec.kind != AssetKind::bg_image && rec.caption_detailed.empty()) {
        throw Error("missing caption_detailed");
    }
    if (rec.kind == AssetKind::fg_image || rec.kind == AssetKind::fg_clip) {
        if (!(rec.confidence >= options.min_confidence) || rec.confidence > 1.0) {
            throw Error("segmentation confidence below threshold");
        }
    }
}

void fill_media_metadata(AssetRecord& rec, const fs::path& root) {
    const auto media = root / rec.path;
    switch (rec.kind) {
        case AssetKind::fg_image: {
            const auto fg = load_foreground(media, rec);
            rec.width = fg.pixels.width();
            rec.height = fg.pixels.height();
            rec.frame_count = 1;
            break;
        }
        case AssetKind::bg_image: {
            const auto bg = load_background(media, rec);
            rec.width = bg.pixels.width();
            rec.height = bg.pixels.height();
            rec.frame_count = 1;
            break;
        }
        case AssetKind::fg_clip:
        case AssetKind::bg_clip: {
            const auto clip = load_clip(media, rec);
            rec.width = clip.extent().width;
            rec.height = clip.extent().height;
            rec.frame_count = clip.frame_count();
            break;
        }
    }
}

json record_to_json(const AssetRecord& rec) {
    return json{{"id", rec.id},
                {"kind", to_string(rec.kind)},
                {"path", rec.path},
                {"caption_brief", rec.caption_brief},
                {"caption_detailed", rec.caption_detailed},
                {"confidence", rec.confidence},
                {"width", rec.width},
                {"height", rec.height},
                {"frame_count", rec.frame_count}};
}

AssetRecord record_from_json(const json& j) {
    AssetRecord rec = record_from_manifest(j);
    rec.width = j.at("width").get<int>();
    rec.height = j.at("height").get<int>();
    rec.frame_count = j.at("frame_count").get<int>();
    return rec;
}

}  // namespace

AssetIndex ingest(const fs::path& manifest_path, const IngestOptions& options) {
    std::ifstream in(manifest_path);
    if (!in) throw Error("cannot read manifest " + manifest_path.string());

    AssetIndex index;
    index.root = manifest_path.parent_path().empty() ? fs::path(".") : manifest_path.parent_path();

    std::set<std::string> seen;
    std::string text;
    int line_no = 0;
    while (std::getline(in, text)) {
        ++line_no;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        AssetRecord rec;
        try {
            rec = record_from_manifest(json::parse(text));
        } catch (const std::exception& e) {
            index.rejected.push_back({line_no, "", std::string("malformed record: ") + e.what()});
            continue;
        }
        if (!seen.insert(rec.id).second) throw Error("duplicate asset id '" + rec.id + "'");
        try {
            check_record(rec, options);
            fill_media_metadata(rec, index.root);
        } catch (const std::exception& e) {
            index.rejected.push_back({line_no, rec.id, e.what()});
            continue;
        }
        index.entries.emplace(rec.id, std::move(rec));
    }
    if (in.bad()) throw Error("error reading manifest " + manifest_path.string());
    save_index(index);
    return index;
}

std::string serialize_index(const AssetIndex& index) {
    json entries = json::array();
    for (const auto& [id, rec] : index.entries) entries.push_back(record_to_json(rec));
    json rejected = json::array();
    for (const auto& r : index.rejected) {
        rejected.push_back({{"line", r.line}, {"id", r.id}, {"reason", r.reason}});
    }
    json counts = json::object();
    for (auto kind : {AssetKind::fg_image, AssetKind::bg_image, AssetKind::fg_clip, AssetKind::bg_clip}) {
        counts[std::string(to_string(kind))] = index.count(kind);
    }
    const json doc{{"format", kIndexFormat},
                   {"version", kIndexVersion},
                   {"counts", counts},
                   {"entries", entries},
                   {"rejected", rejected}};
    return doc.dump(2) + "\n";
}

AssetIndex parse_index(std::string_view text, const fs::path& root) {
    const auto doc = json::parse(text);
    if (doc.value("format", std::string{}) != kIndexFormat) throw Error("not an asset index");
    if (doc.value("version", 0) != kIndexVersion) throw Error("unsupported asset index version");
    AssetIndex index;
    index.root = root;
    for (const auto& e : doc.at("entries")) {
        auto rec = record_from_json(e);
        if (!index.entries.emplace(rec.id, rec).second) throw Error("duplicate asset id '" + rec.id + "'");
    }
    for (const auto& r : doc.at("rejected")) {
        index.rejected.push_back({r.at("line").get<int>(), r.at("id").get<std::string>(),
                                  r.at("reason").get<std::string>()});
    }
    return index;
}

void save_index(const AssetIndex& index) {
    write_file_atomic(index.root / kIndexFileName, serialize_index(index));
}

AssetIndex load_index(const fs::path& root) {
    return parse_index(read_text_file(root / kIndexFileName), root);
}

const AssetRecord& sample_asset(const AssetIndex& index, AssetKind kind, Rng& rng) {
    return sample_asset_if(index, kind, rng, [](const AssetRecord&) { return true; });
}

std::shared_ptr<const ForegroundAsset> AssetStore::foreground(std::string_view id) const {
    {
        std::lock_guard lock(mutex_);
        if (auto it = fg_.find(id); it != fg_.end()) return it->second;
    }
    const auto& rec = index_.at(id);
    if (rec.kind != AssetKind::fg_image) throw Error("asset '" + rec.id + "' is not a foreground image");
    auto asset = std::make_shared<const ForegroundAsset>(load_foreground(index_.root / rec.path, rec));
    std::lock_guard lock(mutex_);
    return fg_.emplace(rec.id, std::move(asset)).first->second;
}

std::shared_ptr<const BackgroundAsset> AssetStore::background(std::string_view id) const {
    {
        std::lock_guard lock(mutex_);
        if (auto it = bg_.find(id); it != bg_.end()) return it->second;
    }
    const auto& rec = index_.at(id);
    if (rec.kind != AssetKind::bg_image) throw Error("asset '" + rec.id + "' is not a background image");
    auto asset = std::make_shared<const BackgroundAsset>(load_background(index_.root / rec.path, rec));
    std::lock_guard lock(mutex_);
    return bg_.emplace(rec.id, std::move(asset)).first->second;
}

std::shared_ptr<const VideoClipAsset> AssetStore::clip(std::string_view id) const {
    {
        std::lock_guard lock(mutex_);
        if (auto it = clips_.find(id); it != clips_.end()) return it->second;
    }
    const auto& rec = index_.at(id);
    if (rec.kind != AssetKind::fg_clip && rec.kind != AssetKind::bg_clip) {
        throw Error("asset '" + rec.id + "' is not a clip");
    }
    auto asset = std::make_shared<const VideoClipAsset>(load_clip(index_.root / rec.path, rec));
    std::lock_guard lock(mutex_);
    return clips_.emplace(rec.id, std::move(asset)).first->second;
}

}  // namespace collagen
