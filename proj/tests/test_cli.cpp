#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>
#include <unistd.h>

#include "collagen/cli.hpp"
#include "collagen/dataset_io.hpp"
#include "collagen/media_io.hpp"
#include "demo_store.hpp"
#include "tree.hpp"

using namespace collagen;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
    int code = 0;
    std::string out;
    std::string err;
};

Result cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("collagen_cli_" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    fs::create_directories(dir.parent_path());
    return dir;
}

const std::string& store_dir() {
    static const std::string dir = [] {
        const auto manifest = demo::write_demo_store(scratch("store"));
        const auto r = cli({"ingest", "--manifest", manifest.string()});
        if (r.code != 0) throw Error("ingest failed: " + r.err);
        return json::parse(r.out).at("store").get<std::string>();
    }();
    return dir;
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

void expect_single_line_error(const Result& r) {
    EXPECT_EQ(r.code, 1);
    const auto ls = lines(r.err);
    ASSERT_EQ(ls.size(), 1u) << r.err;
    EXPECT_TRUE(json::parse(ls[0]).contains("error")) << r.err;
}

std::vector<std::string> synth_args(const fs::path& out, const std::string& count = "10") {
    return {"synth", "image", "--store", store_dir(), "--out", out.string(), "--count", count,
            "--seed", "7", "--bin", "15", "--shard-size", "4", "--quiet"};
}

}  // namespace

TEST(Cli, BinsList) {
    const auto r = cli({"bins", "list"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto ls = lines(r.out);
    ASSERT_EQ(ls.size(), 31u);
    EXPECT_EQ(ls[15], "15\t512\t512\t1.0000");
    EXPECT_EQ(ls[0].substr(0, 2), "0\t");
    const auto j = cli({"bins", "list", "--json"});
    const auto js = lines(j.out);
    ASSERT_EQ(js.size(), 31u);
    EXPECT_EQ(json::parse(js[30]).at("index"), 30);
}

TEST(Cli, UsageErrorsExitTwo) {
    for (const auto& args : std::vector<std::vector<std::string>>{
             {"bins", "list", "--bogus"}, {}, {"teleport"}, {"synth", "image", "--count", "3"}, {"synth"}}) {
        const auto r = cli(args);
        EXPECT_EQ(r.code, 2) << r.err;
        EXPECT_NE(r.err.find("error:"), std::string::npos);
        EXPECT_NE(r.err.find("usage:"), std::string::npos);
    }
}

TEST(Cli, HelpListsEnvironmentVariables) {
    const auto r = cli({"--help"});
    EXPECT_EQ(r.code, 0);
    for (const char* env : {"COLLAGEN_SEED", "COLLAGEN_WORKERS", "COLLAGEN_STORE", "COLLAGEN_OUT", "COLLAGEN_JUDGE",
                            "COLLAGEN_MANIFEST", "COLLAGEN_DATASET"}) {
        EXPECT_NE(r.out.find(env), std::string::npos) << env;
    }
}

TEST(Cli, RuntimeErrorsAreOneJsonLine) {
    expect_single_line_error(cli({"ingest", "--manifest", "/nonexistent/manifest.jsonl"}));
    expect_single_line_error(cli({"stats", "--dataset", "/nonexistent"}));
    auto args = synth_args(scratch("badmix"));
    args.insert(args.end(), {"--edit-types", "video_add"});
    expect_single_line_error(cli(args));
}

TEST(Cli, SynthIsReproducibleAndVerifiable) {
    const auto a = scratch("synth_a");
    const auto b = scratch("synth_b");
    const auto ra = cli(synth_args(a));
    ASSERT_EQ(ra.code, 0) << ra.err;
    EXPECT_TRUE(ra.err.empty());
    const auto summary = json::parse(ra.out);
    EXPECT_TRUE(summary.at("complete").get<bool>());
    ASSERT_EQ(cli(synth_args(b)).code, 0);
    EXPECT_EQ(demo::first_tree_difference(a, b), "");

    const auto v = cli({"verify-dataset", "--dataset", a.string(), "--store", store_dir(), "--replay-every", "1"});
    EXPECT_EQ(v.code, 0) << v.err;
    EXPECT_TRUE(json::parse(v.out).at("ok").get<bool>());

    const auto s = cli({"stats", "--dataset", a.string()});
    ASSERT_EQ(s.code, 0);
    const auto stats = json::parse(s.out);
    EXPECT_TRUE(stats.at("reconciled").get<bool>());
    EXPECT_EQ(stats.at("candidates"), 10);

    const auto records = read_records(a);
    ASSERT_GE(records.size(), 2u);
    const auto png = scratch("preview.png");
    const auto ids = records[0].at("sample_id").get<std::string>() + "," + records[1].at("sample_id").get<std::string>();
    const auto i = cli({"inspect", "--dataset", a.string(), "--ids", ids, "--image", png.string(), "--row-height", "64"});
    ASSERT_EQ(i.code, 0) << i.err;
    const auto bytes = read_text_file(png);
    const auto grid = decode_png_rgb(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
    EXPECT_EQ(grid.height(), 8 + 2 * (64 + 8));
    expect_single_line_error(cli({"inspect", "--dataset", a.string(), "--ids", "nope", "--image", png.string()}));

    const auto victim = shard_path(a, 0) / kShardManifestFile;
    write_file_atomic(victim, std::string_view("{}\n"));
    const auto bad = cli({"verify-dataset", "--dataset", a.string()});
    expect_single_line_error(bad);
}

TEST(Cli, StopAfterThenResumeMatches) {
    const auto full = scratch("full");
    const auto part = scratch("part");
    ASSERT_EQ(cli(synth_args(full, "9")).code, 0);
    auto args = synth_args(part, "9");
    args.insert(args.end(), {"--stop-after", "5"});
    const auto first = cli(args);
    ASSERT_EQ(first.code, 0) << first.err;
    EXPECT_FALSE(json::parse(first.out).at("complete").get<bool>());
    args.resize(args.size() - 2);
    args.insert(args.end(), {"--workers", "3"});
    ASSERT_EQ(cli(args).code, 0);
    EXPECT_EQ(demo::first_tree_difference(full, part), "");

    auto drift = synth_args(part, "9");
    drift[9] = "8";
    const auto r = cli(drift);
    expect_single_line_error(r);
    EXPECT_NE(r.err.find("config drift"), std::string::npos);
}

TEST(Cli, EnvironmentFallbackAndFlagPrecedence) {
    const auto env_only = scratch("env_only");
    const auto flag_wins = scratch("flag_wins");
    ::setenv("COLLAGEN_SEED", "11", 1);
    ::setenv("COLLAGEN_STORE", store_dir().c_str(), 1);
    const auto a = cli({"synth", "image", "--out", env_only.string(), "--count", "2", "--bin", "15", "--quiet"});
    const auto b = cli({"synth", "image", "--out", flag_wins.string(), "--count", "2", "--bin", "15", "--quiet",
                        "--seed", "12"});
    ::unsetenv("COLLAGEN_SEED");
    ::unsetenv("COLLAGEN_STORE");
    ASSERT_EQ(a.code, 0) << a.err;
    ASSERT_EQ(b.code, 0) << b.err;
    EXPECT_EQ(load_json_file(env_only / kConfigFile).at("seed"), 11);
    EXPECT_EQ(load_json_file(flag_wins / kConfigFile).at("seed"), 12);
}

TEST(Cli, ProgressLinesUnlessQuiet) {
    auto args = synth_args(scratch("progress"), "3");
    args.pop_back();
    const auto r = cli(args);
    ASSERT_EQ(r.code, 0);
    EXPECT_NE(r.err.find("progress processed="), std::string::npos);
}

TEST(Cli, VideoSynthAndFilter) {
    const auto v = scratch("video");
    const auto r = cli({"synth", "video", "--store", store_dir(), "--out", v.string(), "--count", "3", "--seed", "2",
                        "--video-shape", "9@96x64", "--quiet", "--ssim-min", "0"});
    ASSERT_EQ(r.code, 0) << r.err;
    for (const auto& rec : read_records(v)) EXPECT_EQ(rec.at("edit_type").get<std::string>().substr(0, 6), "video_");
    expect_single_line_error(cli({"synth", "video", "--store", store_dir(), "--out", scratch("v2").string(), "--count",
                                  "1", "--video-shape", "9@95x64"}));

    const auto f = scratch("filtered");
    const auto fr = cli({"filter", "--in", v.string(), "--out", f.string(), "--judge", "stub:1", "--quiet",
                         "--ssim-min", "0"});
    ASSERT_EQ(fr.code, 0) << fr.err;
    EXPECT_EQ(read_records(f).size(), read_records(v).size());
}

TEST(Cli, VerifyMixPasses) {
    const auto r = cli({"verify-mix", "--seed", "1"});
    EXPECT_EQ(r.code, 0) << r.out << r.err;
    const auto ls = lines(r.out);
    ASSERT_FALSE(ls.empty());
    for (const auto& l : ls) EXPECT_EQ(l.substr(0, 5), "PASS ") << l;
}
