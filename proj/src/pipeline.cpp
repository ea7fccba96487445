#include "collagen/pipeline.hpp"

#include <exception>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

#include "collagen/media_io.hpp"

namespace collagen {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string_view to_string(SynthMode mode) { return mode == SynthMode::image ? "image" : "video"; }

std::string_view to_string(mixref::MixVariant v) {
    return v == mixref::MixVariant::joint_mmdit ? "joint_mmdit" : "self_attention";
}

json gate_json(const GateConfig& gate) {
    return {{"ssim_min", gate.ssim.min},
            {"ssim_max", gate.ssim.max ? json(*gate.ssim.max) : json()},
            {"min_video_passes", gate.min_video_passes}};
}

void remove_stale_temps(const fs::path& root) {
    if (!fs::exists(root / "shards")) return;
    std::vector<fs::path> stale;
    for (const auto& entry : fs::recursive_directory_iterator(root / "shards")) {
        if (entry.is_regular_file() && entry.path().filename().string().find(".tmp.") != std::string::npos) {
            stale.push_back(entry.path());
        }
    }
    for (const auto& p : stale) fs::remove(p);
}

// Returns true when the sample was accepted.
using ProcessFn = std::function<bool(std::uint64_t stream_id, ShardWriter& writer)>;

RunSummary run_shards(const fs::path& root, const json& snapshot, const std::vector<ShardPlan>& plans, int workers,
                      std::optional<std::uint64_t> stop_after, const ProcessFn& process,
                      const std::atomic<bool>* stop, const ProgressFn& progress) {
    init_or_check_config(root, snapshot);
    remove_stale_temps(root);
    const auto todo = resume_plan(root, snapshot, plans);

    std::vector<std::unique_ptr<ShardWriter>> writers;
    std::map<std::uint64_t, std::size_t> owner;
    for (const auto& plan : plans) {
        for (auto id : plan.stream_ids) owner[id] = writers.size();
        writers.push_back(std::make_unique<ShardWriter>(root, plan));
    }
    std::vector<std::mutex> close_locks(writers.size());
    const auto try_close = [&](std::size_t w) {
        std::lock_guard lock(close_locks[w]);
        if (!writers[w]->closed() && writers[w]->complete()) writers[w]->close();
    };
    for (std::size_t w = 0; w < writers.size(); ++w) try_close(w);

    std::atomic<std::size_t> next{0};
    std::atomic<std::uint64_t> processed{0}, accepted{0}, rejected{0};
    std::atomic<bool> failed{false};
    std::exception_ptr failure;
    std::mutex failure_lock, progress_lock;
    const auto limit = stop_after.value_or(todo.size());

    const auto report = [&] {
        if (!progress) return;
        std::lock_guard lock(progress_lock);
        progress({processed.load(), accepted.load(), rejected.load(), todo.size()});
    };

    const auto work = [&] {
        for (;;) {
            if (failed.load() || (stop && stop->load())) return;
            const auto i = next.fetch_add(1);
            if (i >= todo.size() || i >= limit) return;
            const auto id = todo[i];
            const auto w = owner.at(id);
            try {
                (process(id, *writers[w]) ? accepted : rejected).fetch_add(1);
                processed.fetch_add(1);
                try_close(w);
                report();
            } catch (...) {
                std::lock_guard lock(failure_lock);
                if (!failure) failure = std::current_exception();
                failed.store(true);
                return;
            }
        }
    };

    const int n = std::max(1, workers);
    if (n == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n; ++t) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    RunSummary summary;
    summary.progress = {processed.load(), accepted.load(), rejected.load(), todo.size()};
    for (const auto& w : writers) {
        if (!w->closed()) return summary;
    }
    summary.manifest = finalize_manifest(root, plans);
    summary.complete = true;
    return summary;
}

}  // namespace

GenerationPlan generation_plan(const RunConfig& config) {
    GenerationPlan plan;
    plan.mix = config.mix.empty() ? (config.mode == SynthMode::image ? default_image_mix() : default_video_mix())
                                  : config.mix;
    for (const auto& [type, weight] : plan.mix) {
        if (is_video(type) != (config.mode == SynthMode::video)) {
            throw Error("edit type " + std::string(to_string(type)) + " does not match mode " +
                        std::string(to_string(config.mode)));
        }
        (void)weight;
    }
    plan.bin = config.bin;
    plan.video_shape = config.video_shape;
    plan.synth = config.synth;
    return plan;
}

json config_snapshot(const RunConfig& config, const AssetIndex& index) {
    const auto plan = generation_plan(config);
    json synth;
    to_json(synth, config.synth);
    return {{"format", kDatasetFormat},
            {"version", kDatasetVersion},
            {"kind", "synth"},
            {"mode", to_string(config.mode)},
            {"seed", config.seed},
            {"count", config.count},
            {"shard_size", config.shard_size},
            {"edit_mix", format_edit_mix(plan.mix)},
            {"bin", config.bin ? to_json(BinOrShape(*config.bin)) : json()},
            {"video_shape", config.video_shape ? to_json(BinOrShape(*config.video_shape)) : json()},
            {"synth", synth},
            {"gate", gate_json(config.gate)},
            {"judge", config.judge},
            {"mixref",
             {{"n_mix_layers", config.mixing.n_mix_layers},
              {"variant", to_string(config.mixing.variant)},
              {"shared_init_noise", config.mixing.shared_init_noise}}},
            {"store",
             {{"index_digest", sha256_hex(serialize_index(index))}, {"assets", index.entries.size()}}}};
}

RunSummary run_generation(const RunConfig& config, const AssetStore& store, JudgeClient& judge,
                          const std::atomic<bool>* stop, const ProgressFn& progress) {
    if (config.out.empty()) throw Error("missing output directory");
    const auto plan = generation_plan(config);
    const auto snapshot = config_snapshot(config, store.index());
    const auto plans = range_shards(config.count, config.shard_size);

    const auto process = [&](std::uint64_t id, ShardWriter& writer) {
        const RngState state{config.seed, id};
        std::optional<EditSample> sample;
        try {
            sample = synthesize(plan, store, state);
        } catch (const LayoutError& e) {
            Rejection r;
            r.sample_id = make_sample_id(state);
            r.stage = "generate";
            r.reason = e.what();
            writer.write_rejection(id, r, planned_edit_type(plan, state));
            return false;
        }
        const auto result = gate_sample(*sample, config.gate, judge);
        if (result.outcome == GateOutcome::accepted) {
            writer.write_sample(*sample, id, config.seed, result);
            return true;
        }
        writer.write_rejection(id, make_rejection(*sample, result), sample->edit_type);
        return false;
    };
    return run_shards(config.out, snapshot, plans, config.workers, config.stop_after, process, stop, progress);
}

RunSummary run_filter(const FilterConfig& config, JudgeClient& judge, const std::atomic<bool>* stop,
                      const ProgressFn& progress) {
    if (config.out.empty()) throw Error("missing output directory");
    if (fs::absolute(config.out).lexically_normal() == fs::absolute(config.input).lexically_normal()) {
        throw Error("filter output must differ from its input");
    }
    const auto input_manifest = load_json_file(config.input / kManifestFile);

    std::map<std::uint64_t, json> records;
    std::vector<ShardPlan> plans;
    for (const auto& shard : input_manifest.at("shards")) {
        ShardPlan plan{shard.at("id").get<int>(), {}};
        const auto dir = config.input / shard.at("path").get<std::string>();
        const auto text = read_text_file(dir / kShardManifestFile);
        std::size_t pos = 0;
        while (pos < text.size()) {
            auto end = text.find('\n', pos);
            if (end == std::string::npos) end = text.size();
            if (end > pos) {
                auto record = json::parse(text.substr(pos, end - pos));
                const auto id = record.at("stream_id").get<std::uint64_t>();
                plan.stream_ids.push_back(id);
                records.emplace(id, std::move(record));
            }
            pos = end + 1;
        }
        plans.push_back(std::move(plan));
    }

    const json snapshot = {{"format", kDatasetFormat},
                           {"version", kDatasetVersion},
                           {"kind", "filter"},
                           {"seed", input_manifest.at("seed")},
                           {"input_manifest_digest", sha256_hex(input_manifest.dump())},
                           {"input_config", input_manifest.at("config")},
                           {"gate", gate_json(config.gate)},
                           {"judge", config.judge}};

    const auto process = [&](std::uint64_t id, ShardWriter& writer) {
        const auto& record = records.at(id);
        const auto sample = read_sample(config.input, record);
        const auto result = gate_sample(sample, config.gate, judge);
        if (result.outcome == GateOutcome::accepted) {
            writer.write_sample(sample, id, record.at("seed").get<std::uint64_t>(), result);
            return true;
        }
        writer.write_rejection(id, make_rejection(sample, result), sample.edit_type);
        return false;
    };
    return run_shards(config.out, snapshot, plans, config.workers, std::nullopt, process, stop, progress);
}

}  // namespace collagen
