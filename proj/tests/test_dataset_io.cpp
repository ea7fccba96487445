#include <gtest/gtest.h>

#include <csignal>
#include <fstream>
#include <sys/wait.h>
#include <unistd.h>

#include "collagen/media_io.hpp"
#include "collagen/pipeline.hpp"
#include "demo_store.hpp"
#include "tree.hpp"

using namespace collagen;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("collagen_ds_" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    fs::create_directories(dir.parent_path());
    return dir;
}

const AssetStore& store() {
    static const AssetStore s(ingest(demo::write_demo_store(scratch("store"))));
    return s;
}

RunConfig small_run(const fs::path& out, std::uint64_t count = 24) {
    RunConfig c;
    c.out = out;
    c.seed = 7;
    c.count = count;
    c.shard_size = 10;
    c.bin = make_bins()[15];
    return c;
}

RunSummary generate(const RunConfig& c, double pass_rate = 0.8) {
    StubJudge judge(pass_rate);
    return run_generation(c, store(), judge);
}

std::vector<std::string> lines_of(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

EditSample one_sample(std::uint64_t stream) {
    GenerationPlan plan;
    plan.mix = {{EditType::remove, 1.0}};
    plan.bin = make_bins()[15];
    return synthesize(plan, store(), {3, stream});
}

GateResult accept_all(const EditSample& s) {
    StubJudge judge(1.0);
    GateConfig g;
    g.ssim = {0.0, std::nullopt};
    return gate_sample(s, g, judge);
}

}  // namespace

TEST(Shards, RangePlans) {
    const auto plans = range_shards(25, 10);
    ASSERT_EQ(plans.size(), 3u);
    EXPECT_EQ(plans[2].shard_id, 2);
    EXPECT_EQ(plans[2].stream_ids, (std::vector<std::uint64_t>{20, 21, 22, 23, 24}));
    EXPECT_TRUE(range_shards(0, 10).empty());
    EXPECT_THROW(range_shards(5, 0), Error);
    EXPECT_EQ(shard_dir_name(42), "00042");
}

TEST(ShardWriterTest, RoundTripsSamplesAndEnforcesItsContract) {
    const auto root = scratch("roundtrip");
    init_or_check_config(root, {{"kind", "test"}});
    ShardWriter writer(root, {0, {0, 1, 2}});
    const auto a = one_sample(0);
    const auto b = one_sample(1);
    const auto record = writer.write_sample(a, 0, 3, accept_all(a));
    writer.write_sample(b, 1, 3, accept_all(b));
    EXPECT_THROW(writer.write_sample(a, 0, 3, accept_all(a)), Error);
    EXPECT_THROW(writer.write_sample(a, 9, 3, accept_all(a)), Error);
    EXPECT_FALSE(writer.complete());
    writer.write_rejection(2, {"3-00000002", "ssim", 0.2, std::nullopt, false, ""}, EditType::remove);
    EXPECT_TRUE(writer.complete());
    const auto summary = writer.close();
    EXPECT_TRUE(writer.closed());
    EXPECT_EQ(summary.samples, 2u);
    EXPECT_EQ(summary.rejections, 1u);
    EXPECT_THROW(writer.write_rejection(2, {}, EditType::remove), Error);
    EXPECT_FALSE(fs::exists(writer.directory() / "pending"));

    finalize_manifest(root, {{0, {0, 1, 2}}});
    const auto records = read_records(root);
    ASSERT_EQ(records.size(), 2u);
    EXPECT_EQ(records[0], record);
    EXPECT_EQ(records[0].at("sample_id"), "3-00000000");
    EXPECT_EQ(read_sample(root, records[0]), a);
    EXPECT_EQ(read_sample(root, records[1]), b);
    const auto rejections = read_rejections(root);
    ASSERT_EQ(rejections.size(), 1u);
    EXPECT_EQ(rejections[0].at("stage"), "ssim");
    EXPECT_TRUE(verify_dataset(root, &store(), 1).ok());

    EXPECT_THROW(ShardWriter(root, {1, {4, 4}}), Error);
}

TEST(ShardWriterTest, VideoFramesRoundTrip) {
    const auto root = scratch("video");
    init_or_check_config(root, {{"kind", "test"}});
    GenerationPlan plan;
    plan.mix = {{EditType::video_add, 1.0}};
    plan.video_shape = VideoShape{9, 96, 64};
    const auto s = synthesize(plan, store(), {3, 0});
    ShardWriter writer(root, {0, {0}});
    GateConfig g;
    g.ssim = {0.0, std::nullopt};
    StubJudge judge(1.0);
    writer.write_sample(s, 0, 3, gate_sample(s, g, judge));
    writer.close();
    finalize_manifest(root, {{0, {0}}});
    const auto back = read_sample(root, read_records(root).at(0));
    EXPECT_EQ(back, s);
    EXPECT_EQ(read_records(root)[0].at("gate").at("frame_scores").size(), 5u);
    EXPECT_TRUE(verify_dataset(root, &store(), 1).ok());
}

TEST(Generation, WorkerCountDoesNotChangeTheTree) {
    auto one = small_run(scratch("w1"));
    auto four = small_run(scratch("w4"));
    four.workers = 4;
    const auto r1 = generate(one);
    const auto r4 = generate(four);
    ASSERT_TRUE(r1.complete);
    ASSERT_TRUE(r4.complete);
    EXPECT_EQ(demo::first_tree_difference(one.out, four.out), "");
    EXPECT_EQ(r1.manifest.at("total").get<std::uint64_t>() + r1.manifest.at("acceptance").at("rejected").get<std::uint64_t>(),
              24u);
}

TEST(Generation, InterruptedRunResumesToTheSameBytes) {
    const auto reference = small_run(scratch("ref"));
    ASSERT_TRUE(generate(reference).complete);
    auto partial = small_run(scratch("partial"));
    partial.stop_after = 13;
    const auto first = generate(partial);
    EXPECT_FALSE(first.complete);
    EXPECT_EQ(first.progress.processed, 13u);
    EXPECT_TRUE(fs::exists(shard_path(partial.out, 0) / kShardSummaryFile));
    EXPECT_FALSE(fs::exists(partial.out / kManifestFile));
    partial.stop_after.reset();
    partial.workers = 3;
    const auto second = generate(partial);
    EXPECT_TRUE(second.complete);
    EXPECT_EQ(second.progress.processed, 11u);
    EXPECT_EQ(demo::first_tree_difference(reference.out, partial.out), "");

    EXPECT_TRUE(resume_plan(reference.out, config_snapshot(reference, store().index()),
                            range_shards(reference.count, reference.shard_size))
                    .empty());
    const auto again = generate(reference);
    EXPECT_EQ(again.progress.processed, 0u);
    EXPECT_TRUE(again.complete);
}

TEST(Generation, ConfigDriftIsRefused) {
    auto c = small_run(scratch("drift"), 6);
    ASSERT_TRUE(generate(c).complete);
    c.seed = 8;
    try {
        generate(c);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(std::string(e.what()), "config drift");
    }
    c.seed = 7;
    c.gate.ssim.min = 0.6;
    EXPECT_THROW(generate(c), Error);
    c.gate.ssim.min = 0.5;
    c.workers = 5;  // not part of the snapshot
    EXPECT_NO_THROW(generate(c));
}

TEST(Generation, SurvivesSigkillAtArbitraryPoints) {
    const auto reference = small_run(scratch("kill_ref"), 40);
    ASSERT_TRUE(generate(reference).complete);
    store().index();
    for (int delay_ms : {150, 600, 1200}) {
        auto c = small_run(scratch("kill_" + std::to_string(delay_ms)), 40);
        c.workers = 2;
        const pid_t pid = ::fork();
        ASSERT_GE(pid, 0);
        if (pid == 0) {
            try {
                generate(c);
            } catch (...) {
                ::_exit(3);
            }
            ::_exit(0);
        }
        ::usleep(static_cast<useconds_t>(delay_ms) * 1000);
        ::kill(pid, SIGKILL);
        int status = 0;
        ::waitpid(pid, &status, 0);
        c.workers = 1;
        const auto resumed = generate(c);
        ASSERT_TRUE(resumed.complete) << delay_ms;
        EXPECT_EQ(demo::first_tree_difference(reference.out, c.out), "") << "killed after " << delay_ms << " ms";
    }
}

TEST(Verify, DetectsFlippedBytesAndDroppedLines) {
    const auto c = small_run(scratch("verify"), 12);
    ASSERT_TRUE(generate(c, 1.0).complete);
    const auto clean = verify_dataset(c.out, &store(), 1);
    EXPECT_TRUE(clean.ok()) << to_json(clean).dump();
    EXPECT_GT(clean.records, 0u);
    EXPECT_EQ(clean.replayed, clean.records);

    fs::path victim;
    for (const auto& e : fs::directory_iterator(shard_path(c.out, 0))) {
        if (e.path().extension() == ".png") {
            victim = e.path();
            break;
        }
    }
    ASSERT_FALSE(victim.empty());
    const auto original = read_text_file(victim);
    auto flipped = original;
    flipped[flipped.size() / 2] ^= 0x01;
    write_file_atomic(victim, flipped);
    const auto bad = verify_dataset(c.out);
    ASSERT_EQ(bad.violations.size(), 1u) << to_json(bad).dump();
    EXPECT_EQ(bad.violations[0].kind, "digest");
    EXPECT_NE(bad.violations[0].path.find(victim.filename().string()), std::string::npos);
    write_file_atomic(victim, original);
    EXPECT_TRUE(verify_dataset(c.out).ok());

    const auto manifest = shard_path(c.out, 1) / kShardManifestFile;
    auto lines = lines_of(manifest);
    ASSERT_GE(lines.size(), 2u);
    lines.pop_back();
    std::string text;
    for (const auto& l : lines) text += l + "\n";
    write_file_atomic(manifest, text);
    const auto short_report = verify_dataset(c.out);
    EXPECT_FALSE(short_report.ok());
    EXPECT_TRUE(std::any_of(short_report.violations.begin(), short_report.violations.end(),
                            [](const Violation& v) { return v.kind == "count"; }))
        << to_json(short_report).dump();
}

TEST(Verify, ReplayCatchesTamperedMediaWithMatchingDigests) {
    const auto c = small_run(scratch("replay"), 4);
    ASSERT_TRUE(generate(c, 1.0).complete);
    const auto records = read_records(c.out);
    ASSERT_FALSE(records.empty());
    // Swap the two media files of one record: digests and sizes still check out.
    const auto src = c.out / records[0].at("source_path").get<std::string>();
    const auto dst = c.out / records[0].at("target_path").get<std::string>();
    const auto a = read_text_file(src), b = read_text_file(dst);
    write_file_atomic(src, b);
    write_file_atomic(dst, a);
    const auto report = verify_dataset(c.out, &store(), 1);
    EXPECT_FALSE(report.ok());
}

TEST(Stats, ReconcileWithTheManifest) {
    const auto c = small_run(scratch("stats"), 30);
    ASSERT_TRUE(generate(c, 0.6).complete);
    const auto stats = dataset_stats(c.out);
    EXPECT_TRUE(stats.at("reconciled").get<bool>()) << stats.dump(2);
    std::uint64_t accepted = 0, rejected = 0;
    for (const auto& [type, row] : stats.at("per_type").items()) {
        accepted += row.at("accepted").get<std::uint64_t>();
        rejected += row.at("rejected").get<std::uint64_t>();
    }
    EXPECT_EQ(accepted, stats.at("total").get<std::uint64_t>());
    EXPECT_EQ(accepted + rejected, 30u);
    EXPECT_EQ(read_rejections(c.out).size(), rejected);
    EXPECT_GT(rejected, 0u);
}

TEST(Filter, RegatesIntoANewDataset) {
    const auto c = small_run(scratch("filter_in"), 12);
    ASSERT_TRUE(generate(c, 1.0).complete);
    FilterConfig f;
    f.input = c.out;
    f.out = scratch("filter_out");
    f.gate.ssim = {0.0, std::nullopt};
    StubJudge judge(0.5, 4);
    const auto r = run_filter(f, judge);
    ASSERT_TRUE(r.complete);
    const auto before = read_records(c.out);
    const auto after = read_records(f.out);
    EXPECT_EQ(after.size() + read_rejections(f.out).size(), before.size());
    EXPECT_LT(after.size(), before.size());
    EXPECT_TRUE(verify_dataset(f.out).ok());
    f.out = f.input;
    EXPECT_THROW(run_filter(f, judge), Error);
}
