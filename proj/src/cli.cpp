#include "collagen/cli.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "collagen/asset_store.hpp"
#include "collagen/compositor.hpp"
#include "collagen/dataset_io.hpp"
#include "collagen/layout.hpp"
#include "collagen/media_io.hpp"
#include "collagen/mixref.hpp"
#include "collagen/pipeline.hpp"

namespace collagen {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kEnvPrefix = "COLLAGEN_";

std::string env_name(std::string_view flag) {
    std::string out(kEnvPrefix);
    for (char c : flag.substr(flag.find_first_not_of('-'))) {
        out += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    return out;
}

/// Registers an option with its environment fallback.
template <typename T>
CLI::Option* add(CLI::App* app, std::string flag, T& value, std::string help) {
    CLI::Option* opt = nullptr;
    if constexpr (std::is_same_v<T, bool>) {
        opt = app->add_flag(flag, value, std::move(help));
    } else {
        opt = app->add_option(flag, value, std::move(help));
    }
    opt->envname(env_name(flag));
    return opt;
}

AspectBin parse_bin(const std::string& text) {
    const auto x = text.find('x');
    if (x == std::string::npos) {
        std::size_t used = 0;
        int k = -1;
        try {
            k = std::stoi(text, &used);
        } catch (const std::logic_error&) {
        }
        if (used != text.size() || k < 0 || k >= kBinCount) throw Error("bin must be an index 0-30 or WxH");
        return make_bins()[static_cast<std::size_t>(k)];
    }
    try {
        return AspectBin::custom(std::stoi(text.substr(0, x)), std::stoi(text.substr(x + 1)));
    } catch (const std::logic_error&) {
        throw Error("bin must be an index 0-30 or WxH");
    }
}

VideoShape parse_video_shape(const std::string& text) {
    const auto at = text.find('@');
    const auto x = text.find('x', at == std::string::npos ? 0 : at);
    if (at == std::string::npos || x == std::string::npos) throw Error("video shape must be FRAMES@WxH");
    VideoShape s;
    try {
        s.frame_count = std::stoi(text.substr(0, at));
        s.width = std::stoi(text.substr(at + 1, x - at - 1));
        s.height = std::stoi(text.substr(x + 1));
    } catch (const std::logic_error&) {
        throw Error("video shape must be FRAMES@WxH");
    }
    if (s.frame_count < 5 || s.width <= 0 || s.height <= 0 || s.width % 16 || s.height % 16) {
        throw Error("video shape needs at least 5 frames and sides that are multiples of 16");
    }
    return s;
}

struct Reporter {
    std::ostream& err;
    bool quiet = false;
    std::chrono::steady_clock::time_point last{};

    void operator()(const Progress& p) {
        if (quiet) return;
        const auto now = std::chrono::steady_clock::now();
        if (p.processed != p.remaining && now - last < std::chrono::seconds(1)) return;
        last = now;
        err << "progress processed=" << p.processed << "/" << p.remaining << " accepted=" << p.accepted
            << " rejected=" << p.rejected << "\n"
            << std::flush;
    }
};

json summary_json(const RunSummary& s, const fs::path& out) {
    return {{"dataset", out.string()},
            {"complete", s.complete},
            {"processed", s.progress.processed},
            {"accepted", s.progress.accepted},
            {"rejected", s.progress.rejected},
            {"total", s.complete ? s.manifest.at("total") : json()}};
}

RgbImage resize_rgb(const RgbImage& src, Extent size) {
    RgbaImage rgba(src.width(), src.height());
    for (int y = 0; y < src.height(); ++y) {
        for (int x = 0; x < src.width(); ++x) {
            const auto p = src(x, y);
            rgba(x, y) = {p.r, p.g, p.b, 255};
        }
    }
    const auto scaled = resample_bilinear(rgba, size);
    RgbImage out(size.width, size.height);
    for (int y = 0; y < size.height; ++y) {
        for (int x = 0; x < size.width; ++x) {
            const auto p = scaled(x, y);
            out(x, y) = {p.r, p.g, p.b};
        }
    }
    return out;
}

void blit(RgbImage& dst, const RgbImage& src, int x0, int y0) {
    for (int y = 0; y < src.height() && y0 + y < dst.height(); ++y) {
        for (int x = 0; x < src.width() && x0 + x < dst.width(); ++x) dst(x0 + x, y0 + y) = src(x, y);
    }
}

void draw_label(RgbImage& dst, const std::string& text, int x0, int y0, int max_width, int glyph) {
    // Greedy word wrap on the label font's advance.
    const int advance = text_extent(1, glyph).width + static_cast<int>(std::lround(glyph / 7.0));
    const auto per_line = static_cast<std::size_t>(std::max(1, max_width / std::max(1, advance)));
    std::vector<std::string> lines;
    std::istringstream words(text);
    std::string word, line;
    while (words >> word) {
        if (!line.empty() && line.size() + 1 + word.size() > per_line) {
            lines.push_back(line);
            line.clear();
        }
        line += (line.empty() ? "" : " ") + word;
    }
    if (!line.empty()) lines.push_back(line);
    int y = y0;
    for (const auto& l : lines) {
        if (y + glyph > dst.height()) break;
        const auto matte = rasterize_text(l, glyph, true);
        for (int yy = 0; yy < matte.height(); ++yy) {
            for (int xx = 0; xx < matte.width() && x0 + xx < dst.width(); ++xx) {
                const auto a = matte(xx, yy);
                auto& p = dst(x0 + xx, y + yy);
                p = {blend_channel(20, p.r, a), blend_channel(20, p.g, a), blend_channel(20, p.b, a)};
            }
        }
        y += glyph + glyph / 2;
    }
}

RgbImage preview_grid(const fs::path& root, const std::vector<json>& records, int row_height) {
    constexpr int kGap = 8;
    constexpr int kLabelWidth = 360;
    std::vector<std::pair<RgbImage, RgbImage>> rows;
    std::vector<std::string> labels;
    int cell_width = 0;
    for (const auto& record : records) {
        const auto sample = read_sample(root, record);
        const auto& src = sample.source.front();
        const auto& tar = sample.target.front();
        const int w = std::max(1, static_cast<int>(std::lround(row_height * static_cast<double>(src.width()) / src.height())));
        rows.emplace_back(resize_rgb(src, {w, row_height}), resize_rgb(tar, {w, row_height}));
        labels.push_back(sample.sample_id + " " + std::string(to_string(sample.edit_type)) + ": " + sample.instruction);
        cell_width = std::max(cell_width, w);
    }
    const int width = kGap + 2 * (cell_width + kGap) + kLabelWidth + kGap;
    const int height = kGap + static_cast<int>(rows.size()) * (row_height + kGap);
    RgbImage grid(width, height, Rgb8{235, 235, 235});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const int y = kGap + static_cast<int>(i) * (row_height + kGap);
        blit(grid, rows[i].first, kGap, y);
        blit(grid, rows[i].second, kGap + cell_width + kGap, y);
        draw_label(grid, labels[i], kGap + 2 * (cell_width + kGap), y, kLabelWidth, 14);
    }
    return grid;
}

std::vector<std::string> split_ids(const std::vector<std::string>& raw) {
    std::vector<std::string> out;
    for (const auto& item : raw) {
        std::size_t pos = 0;
        while (pos <= item.size()) {
            const auto comma = std::min(item.find(',', pos), item.size());
            if (comma > pos) out.push_back(item.substr(pos, comma - pos));
            pos = comma + 1;
        }
    }
    return out;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const std::atomic<bool>* stop) {
    CLI::App app{"Collage-based synthesis of instruction-editing pairs", "collagen"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    // ingest
    std::string manifest;
    double min_confidence = IngestOptions{}.min_confidence;
    auto* ingest_cmd = app.add_subcommand("ingest", "Validate an asset manifest and write the store index");
    add(ingest_cmd, "--manifest", manifest, "Line-delimited asset manifest")->required();
    add(ingest_cmd, "--min-confidence", min_confidence, "Minimum segmentation confidence")->capture_default_str();

    // synth
    std::string store, out_dir, edit_types, bin_text, shape_text, judge = "stub";
    std::uint64_t seed = 0, count = 0, stop_after = 0;
    int workers = 1, shard_size = kDefaultShardSize, mix_layers = -1;
    double ssim_min = SsimThresholds{}.min, ssim_max = -1.0;
    bool quiet = false;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a dataset");
    synth_cmd->require_subcommand(1);
    std::vector<CLI::App*> synth_modes{synth_cmd->add_subcommand("image", "Image editing pairs"),
                                       synth_cmd->add_subcommand("video", "Video editing pairs")};
    for (auto* mode : synth_modes) {
        add(mode, "--store", store, "Asset store directory (holds index.json)")->required();
        add(mode, "--out", out_dir, "Dataset root")->required();
        add(mode, "--seed", seed, "Global seed")->capture_default_str();
        add(mode, "--count", count, "Number of stream ids to process")->required();
        add(mode, "--edit-types", edit_types, "Edit mix, e.g. remove,add:2 (default: all types of the mode)");
        add(mode, "--workers", workers, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
        add(mode, "--shard-size", shard_size, "Stream ids per shard")->capture_default_str()->check(CLI::PositiveNumber);
        add(mode, "--ssim-min", ssim_min, "Minimum MS-SSIM")->capture_default_str();
        add(mode, "--ssim-max", ssim_max, "Maximum MS-SSIM (negative disables)")->capture_default_str();
        add(mode, "--judge", judge, "stub, stub:<pass rate> or http:// endpoint")->capture_default_str();
        add(mode, "--mix-layers", mix_layers, "Feature-mixing layers recorded with the run (default 18 image, 13 video)");
        add(mode, "--stop-after", stop_after, "Stop after this many stream ids (0 = no limit)");
        add(mode, "--quiet", quiet, "No progress lines");
    }
    add(synth_modes[0], "--bin", bin_text, "Fixed aspect bin: index 0-30 or WxH");
    add(synth_modes[1], "--video-shape", shape_text, "Fixed video shape FRAMES@WxH");

    // filter
    std::string input;
    auto* filter_cmd = app.add_subcommand("filter", "Re-gate a dataset into a new dataset");
    add(filter_cmd, "--in", input, "Input dataset root")->required();
    add(filter_cmd, "--out", out_dir, "Output dataset root")->required();
    add(filter_cmd, "--ssim-min", ssim_min, "Minimum MS-SSIM")->capture_default_str();
    add(filter_cmd, "--ssim-max", ssim_max, "Maximum MS-SSIM (negative disables)")->capture_default_str();
    add(filter_cmd, "--judge", judge, "stub, stub:<pass rate> or http:// endpoint")->capture_default_str();
    add(filter_cmd, "--workers", workers, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    add(filter_cmd, "--quiet", quiet, "No progress lines");

    // inspect
    std::string dataset, image_path;
    std::vector<std::string> ids;
    int row_height = 192;
    auto* inspect_cmd = app.add_subcommand("inspect", "Render a source|target|instruction preview grid");
    add(inspect_cmd, "--dataset", dataset, "Dataset root")->required();
    add(inspect_cmd, "--ids", ids, "Sample ids (comma separated or repeated)")->required()->delimiter(',');
    add(inspect_cmd, "--image", image_path, "Output PNG path")->required();
    add(inspect_cmd, "--row-height", row_height, "Preview row height in pixels")->capture_default_str()->check(CLI::Range(32, 1024));

    // stats
    auto* stats_cmd = app.add_subcommand("stats", "Per-type counts and acceptance rates");
    add(stats_cmd, "--dataset", dataset, "Dataset root")->required();

    // bins
    auto* bins_cmd = app.add_subcommand("bins", "Aspect bins");
    bins_cmd->require_subcommand(1);
    auto* bins_list = bins_cmd->add_subcommand("list", "Print the 31 bins: index width height aspect");
    bool bins_json = false;
    add(bins_list, "--json", bins_json, "One JSON object per line");

    // verify-mix
    std::uint64_t mix_seed = 0;
    auto* mix_cmd = app.add_subcommand("verify-mix", "Run the feature-mixing invariant suite");
    add(mix_cmd, "--seed", mix_seed, "Model and noise seed")->capture_default_str();

    // verify-dataset
    std::uint64_t replay_every = 0;
    auto* verify_cmd = app.add_subcommand("verify-dataset", "Check digests, counts, dimensions and replay");
    add(verify_cmd, "--dataset", dataset, "Dataset root")->required();
    add(verify_cmd, "--store", store, "Asset store for provenance replay");
    add(verify_cmd, "--replay-every", replay_every, "Replay every n-th record (0 = none; default 10 with --store)");

    std::ostringstream footer;
    footer << "\nEvery flag falls back to an environment variable; the flag wins when both are set:\n";
    std::set<std::string> envs;
    const std::function<void(const CLI::App*)> collect = [&](const CLI::App* a) {
        for (const auto* opt : a->get_options()) {
            if (!opt->get_envname().empty()) envs.insert(opt->get_envname() + "  (" + opt->get_name() + ")");
        }
        for (const auto* sub : a->get_subcommands({})) collect(sub);
    };
    collect(&app);
    for (const auto& e : envs) footer << "  " << e << "\n";
    app.footer(footer.str());

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return 0;
        }
        err << "error: " << e.what() << "\n";
        err << "usage: collagen <ingest|synth image|synth video|filter|inspect|stats|bins list|verify-mix|verify-dataset> "
               "[options]; see --help\n";
        return 2;
    }

    const auto thresholds = [&] {
        SsimThresholds t;
        t.min = ssim_min;
        if (ssim_max >= 0.0) t.max = ssim_max;
        return t;
    };

    try {
        if (ingest_cmd->parsed()) {
            IngestOptions options;
            options.min_confidence = min_confidence;
            const auto index = ingest(manifest, options);
            json counts = json::object();
            for (auto kind : {AssetKind::fg_image, AssetKind::bg_image, AssetKind::fg_clip, AssetKind::bg_clip}) {
                counts[std::string(to_string(kind))] = index.count(kind);
            }
            json rejected = json::array();
            for (const auto& r : index.rejected) rejected.push_back({{"line", r.line}, {"id", r.id}, {"reason", r.reason}});
            out << json{{"store", index.root.string()}, {"counts", counts}, {"rejected", rejected}}.dump() << "\n";
            return 0;
        }

        for (std::size_t m = 0; m < synth_modes.size(); ++m) {
            if (!synth_modes[m]->parsed()) continue;
            RunConfig config;
            config.store = store;
            config.out = out_dir;
            config.seed = seed;
            config.count = count;
            config.mode = m == 0 ? SynthMode::image : SynthMode::video;
            if (!edit_types.empty()) config.mix = parse_edit_mix(edit_types);
            config.workers = workers;
            config.shard_size = shard_size;
            if (!bin_text.empty()) config.bin = parse_bin(bin_text);
            if (!shape_text.empty()) config.video_shape = parse_video_shape(shape_text);
            config.gate.ssim = thresholds();
            config.judge = judge;
            config.mixing = config.mode == SynthMode::image ? mixref::MixingConfig::image() : mixref::MixingConfig::video();
            if (mix_layers >= 0) config.mixing.n_mix_layers = mix_layers;
            if (stop_after > 0) config.stop_after = stop_after;

            const auto asset_store = AssetStore::open(store);
            auto client = make_judge(judge);
            Reporter reporter{err, quiet};
            const auto summary = run_generation(config, asset_store, *client, stop, std::ref(reporter));
            out << summary_json(summary, config.out).dump() << "\n";
            return 0;
        }

        if (filter_cmd->parsed()) {
            FilterConfig config;
            config.input = input;
            config.out = out_dir;
            config.gate.ssim = thresholds();
            config.judge = judge;
            config.workers = workers;
            auto client = make_judge(judge);
            Reporter reporter{err, quiet};
            const auto summary = run_filter(config, *client, stop, std::ref(reporter));
            out << summary_json(summary, config.out).dump() << "\n";
            return 0;
        }

        if (inspect_cmd->parsed()) {
            const auto wanted = split_ids(ids);
            std::map<std::string, json> by_id;
            for (auto& r : read_records(dataset)) by_id.emplace(r.at("sample_id").get<std::string>(), std::move(r));
            std::vector<json> chosen;
            for (const auto& id : wanted) {
                const auto it = by_id.find(id);
                if (it == by_id.end()) throw Error("unknown sample id: " + id);
                chosen.push_back(it->second);
            }
            write_file_atomic(image_path, encode_png(preview_grid(dataset, chosen, row_height)));
            out << json{{"image", image_path}, {"samples", wanted}}.dump() << "\n";
            return 0;
        }

        if (stats_cmd->parsed()) {
            out << dataset_stats(dataset).dump() << "\n";
            return 0;
        }

        if (bins_list->parsed()) {
            for (const auto& b : make_bins()) {
                if (bins_json) {
                    out << json{{"index", b.index}, {"width", b.width}, {"height", b.height}, {"aspect", b.aspect}}.dump()
                        << "\n";
                } else {
                    char buf[64];
                    std::snprintf(buf, sizeof buf, "%d\t%d\t%d\t%.4f\n", b.index, b.width, b.height, b.aspect);
                    out << buf;
                }
            }
            return 0;
        }

        if (mix_cmd->parsed()) {
            bool all = true;
            for (const auto& r : mixref::run_property_suite(mix_seed)) {
                all = all && r.passed;
                char buf[32];
                std::snprintf(buf, sizeof buf, "%.3f", r.seconds);
                out << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << buf << "s) " << r.detail << "\n";
            }
            if (!all) {
                err << json{{"error", "mixing invariants failed"}}.dump() << "\n";
                return 1;
            }
            return 0;
        }

        if (verify_cmd->parsed()) {
            std::optional<AssetStore> asset_store;
            if (!store.empty()) asset_store.emplace(AssetStore::open(store));
            if (asset_store && replay_every == 0 && verify_cmd->count("--replay-every") == 0) replay_every = 10;
            const auto report = verify_dataset(dataset, asset_store ? &*asset_store : nullptr, replay_every);
            out << to_json(report).dump() << "\n";
            if (!report.ok()) {
                err << json{{"error", "dataset verification failed"}, {"violations", report.violations.size()}}.dump()
                    << "\n";
                return 1;
            }
            return 0;
        }
    } catch (const std::exception& e) {
        err << json{{"error", e.what()}}.dump() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace collagen
