#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <thread>

#include <httplib.h>

#include "collagen/quality_gate.hpp"

using namespace collagen;
using nlohmann::json;

namespace {

LumaImage noise(int w, int h, std::uint64_t seed) {
    Rng rng(RngState{seed, 0});
    LumaImage img(w, h);
    for (auto& v : img.pixels()) v = std::floor(rng.uniform(0.0, 256.0));
    return img;
}

LumaImage smooth_pattern(int w, int h, double phase) {
    LumaImage img(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) img(x, y) = 128.0 + 90.0 * std::sin(0.21 * x + phase) * std::cos(0.17 * y);
    }
    return img;
}

// Straight 2-D windowed SSIM, no separable passes.
std::pair<double, double> reference_terms(const LumaImage& a, const LumaImage& b) {
    double g[11], sum = 0;
    for (int i = 0; i < 11; ++i) sum += g[i] = std::exp(-(i - 5) * (i - 5) / 4.5);
    for (double& v : g) v /= sum;
    const double c1 = 6.5025, c2 = 58.5225;
    double ssim = 0, cs = 0;
    int n = 0;
    for (int y = 0; y + 11 <= a.height(); ++y) {
        for (int x = 0; x + 11 <= a.width(); ++x) {
            double mx = 0, my = 0;
            for (int j = 0; j < 11; ++j) {
                for (int i = 0; i < 11; ++i) {
                    mx += g[i] * g[j] * a(x + i, y + j);
                    my += g[i] * g[j] * b(x + i, y + j);
                }
            }
            double vx = 0, vy = 0, cxy = 0;
            for (int j = 0; j < 11; ++j) {
                for (int i = 0; i < 11; ++i) {
                    const double dx = a(x + i, y + j) - mx, dy = b(x + i, y + j) - my;
                    vx += g[i] * g[j] * dx * dx;
                    vy += g[i] * g[j] * dy * dy;
                    cxy += g[i] * g[j] * dx * dy;
                }
            }
            const double c = (2 * cxy + c2) / (vx + vy + c2);
            cs += c;
            ssim += (2 * mx * my + c1) / (mx * mx + my * my + c1) * c;
            ++n;
        }
    }
    return {ssim / n, cs / n};
}

LumaImage halve(const LumaImage& img) {
    LumaImage out(img.width() / 2, img.height() / 2);
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
            out(x, y) = (img(2 * x, 2 * y) + img(2 * x + 1, 2 * y) + img(2 * x, 2 * y + 1) + img(2 * x + 1, 2 * y + 1)) / 4;
        }
    }
    return out;
}

double reference_ms_ssim(LumaImage a, LumaImage b) {
    const double w[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
    int scales = 0;
    while (scales < 5 && (std::min(a.width(), a.height()) >> scales) >= 11) ++scales;
    double wsum = 0;
    for (int j = 0; j < scales; ++j) wsum += w[j];
    double out = 1;
    for (int j = 0; j < scales; ++j) {
        const auto [s, c] = reference_terms(a, b);
        out *= std::pow(std::max(0.0, j + 1 < scales ? c : s), w[j] / wsum);
        a = halve(a);
        b = halve(b);
    }
    return out;
}

RgbImage rgb_noise(int w, int h, std::uint64_t seed) {
    Rng rng(RngState{seed, 1});
    RgbImage img(w, h);
    for (auto& p : img.pixels()) {
        p = {static_cast<std::uint8_t>(rng.below(256)), static_cast<std::uint8_t>(rng.below(256)),
             static_cast<std::uint8_t>(rng.below(256))};
    }
    return img;
}

EditSample video_sample(int frames, const std::string& id) {
    EditSample s;
    s.sample_id = id;
    s.instruction = "remove the fox";
    s.bin_or_shape = VideoShape{frames, 32, 32};
    for (int f = 0; f < frames; ++f) {
        s.source.push_back(rgb_noise(32, 32, 100 + f));
        s.target.push_back(rgb_noise(32, 32, 100 + f));
    }
    return s;
}

EditSample image_sample(const std::string& id, std::uint64_t a, std::uint64_t b) {
    EditSample s;
    s.sample_id = id;
    s.instruction = "add a cat";
    s.bin_or_shape = make_bins()[0];
    s.source = {rgb_noise(48, 40, a)};
    s.target = {rgb_noise(48, 40, b)};
    return s;
}

}  // namespace

TEST(MsSsim, MatchesBruteForceReference) {
    for (auto [w, h] : {std::pair{64, 48}, {96, 96}, {200, 60}, {23, 11}}) {
        const auto a = smooth_pattern(w, h, 0.0);
        auto b = smooth_pattern(w, h, 0.4);
        const auto n = noise(w, h, 3);
        for (std::size_t i = 0; i < b.pixels().size(); ++i) b.pixels()[i] += 0.1 * (n.pixels()[i] - 128);
        EXPECT_NEAR(ms_ssim(a, b).composite, reference_ms_ssim(a, b), 1e-4) << w << "x" << h;
        EXPECT_NEAR(ssim_single_scale(a, b), reference_terms(a, b).first, 1e-9);
    }
}

TEST(MsSsim, IdentityAndSymmetry) {
    const auto a = noise(80, 64, 1);
    const auto b = noise(80, 64, 2);
    EXPECT_NEAR(ms_ssim(a, a).composite, 1.0, 1e-12);
    EXPECT_DOUBLE_EQ(ms_ssim(a, b).composite, ms_ssim(b, a).composite);
    const auto r = ms_ssim(a, b);
    EXPECT_GE(r.composite, 0.0);
    EXPECT_LT(r.composite, 0.2);
    EXPECT_EQ(r.per_scale_scores.size(), 3u);
}

TEST(MsSsim, ScaleCountFollowsTheShorterSide) {
    EXPECT_EQ(ms_ssim_scale_count(10), 0);
    EXPECT_EQ(ms_ssim_scale_count(11), 1);
    EXPECT_EQ(ms_ssim_scale_count(22), 2);
    EXPECT_EQ(ms_ssim_scale_count(176), 5);
    EXPECT_EQ(ms_ssim_scale_count(4096), 5);
    EXPECT_EQ(ms_ssim(noise(400, 300, 1), noise(400, 300, 2)).per_scale_scores.size(), 5u);
}

TEST(MsSsim, RejectsBadInputs) {
    EXPECT_THROW(ms_ssim(noise(20, 20, 1), noise(21, 20, 1)), Error);
    EXPECT_THROW(ms_ssim(noise(10, 20, 1), noise(10, 20, 1)), Error);
}

TEST(MsSsim, ThresholdsBracketTheScore) {
    const auto a = smooth_pattern(64, 64, 0.0);
    const auto b = smooth_pattern(64, 64, 0.3);
    const double s = ms_ssim(a, b).composite;
    EXPECT_EQ(ms_ssim(a, b, {s - 1e-9, std::nullopt}).verdict, GateVerdict::accept);
    EXPECT_EQ(ms_ssim(a, b, {s + 1e-9, std::nullopt}).verdict, GateVerdict::reject);
    EXPECT_EQ(ms_ssim(a, b, {0.0, s - 1e-9}).verdict, GateVerdict::reject);
    EXPECT_EQ(ms_ssim(a, b, {0.3}).threshold_used, 0.3);
}

TEST(MsSsim, VideoUsesFiveEvenlySpacedFrames) {
    EXPECT_EQ(video_frame_indices(81), (std::array<int, 5>{0, 20, 40, 60, 80}));
    EXPECT_EQ(video_frame_indices(5), (std::array<int, 5>{0, 1, 2, 3, 4}));
    EXPECT_EQ(video_frame_indices(10), (std::array<int, 5>{0, 2, 5, 7, 9}));
    EXPECT_THROW(video_frame_indices(4), Error);

    auto s = video_sample(9, "v");
    for (int f : {0, 2, 4, 6, 8}) s.target[f] = rgb_noise(32, 32, 900 + f);
    const auto r = ms_ssim_video(s.source, s.target);
    ASSERT_TRUE(r.frame_scores);
    double mean = 0;
    for (int k = 0; k < 5; ++k) {
        const int f = 2 * k;
        EXPECT_DOUBLE_EQ((*r.frame_scores)[k], ms_ssim(s.source[f], s.target[f]).composite);
        mean += (*r.frame_scores)[k] / 5;
    }
    EXPECT_NEAR(r.composite, mean, 1e-12);
    const auto untouched = ms_ssim_video(video_sample(9, "u").source, video_sample(9, "u").target);
    EXPECT_NEAR(untouched.composite, 1.0, 1e-12);
}

TEST(Gate, AllVideoVerdictPatterns) {
    StubJudge judge;
    GateConfig config;
    config.ssim = {0.0, std::nullopt};
    for (int mask = 0; mask < 32; ++mask) {
        const auto id = "v" + std::to_string(mask);
        std::vector<bool> verdicts;
        for (int k = 0; k < 5; ++k) verdicts.push_back((mask >> k) & 1);
        judge.set_verdicts(id, verdicts);
        const auto r = gate_sample(video_sample(9, id), config, judge);
        const int passes = __builtin_popcount(mask);
        EXPECT_EQ(r.outcome, passes >= 4 ? GateOutcome::accepted : GateOutcome::rejected) << mask;
        ASSERT_EQ(r.verdicts.size(), 5u);
        for (int k = 0; k < 5; ++k) {
            EXPECT_EQ(r.verdicts[k].pass, verdicts[k]);
            EXPECT_EQ(r.verdicts[k].frame_index, 2 * k);
        }
        if (passes < 4) EXPECT_EQ(r.stage, "judge");
    }
}

TEST(Gate, ImageNeedsOnePassingVerdictAndSsimComesFirst) {
    StubJudge judge;
    GateConfig config;
    config.ssim = {0.0, std::nullopt};
    judge.set_verdicts("yes", {true});
    judge.set_verdicts("no", {false});
    EXPECT_EQ(gate_sample(image_sample("yes", 1, 2), config, judge).outcome, GateOutcome::accepted);
    const auto no = gate_sample(image_sample("no", 1, 2), config, judge);
    EXPECT_EQ(no.outcome, GateOutcome::rejected);
    EXPECT_EQ(no.reason, "stub verdict table");

    config.ssim = {0.9, std::nullopt};
    const auto low = gate_sample(image_sample("yes", 1, 2), config, judge);
    EXPECT_EQ(low.outcome, GateOutcome::rejected);
    EXPECT_EQ(low.stage, "ssim");
    EXPECT_TRUE(low.verdicts.empty());
    config.ssim = {0.5, 0.99};
    EXPECT_EQ(gate_sample(image_sample("yes", 1, 1), config, judge).stage, "ssim");
}

TEST(Gate, StubHashRateIsRoughlyRespectedAndStable) {
    StubJudge a(0.7, 9), b(0.7, 9);
    int passes = 0;
    for (int i = 0; i < 5000; ++i) {
        JudgeRequest req{"s" + std::to_string(i), "x", 0, std::nullopt, {}, {}};
        const auto v = a.judge(req);
        EXPECT_EQ(v, b.judge(req));
        passes += v.pass;
    }
    EXPECT_NEAR(passes / 5000.0, 0.7, 0.03);
    EXPECT_THROW(StubJudge(1.5), Error);
}

TEST(Gate, ParsesJudgeResponses) {
    EXPECT_TRUE(parse_judge_response(R"({"pass": true, "reasons": []})").pass);
    EXPECT_EQ(parse_judge_response(R"({"pass": false, "reasons": ["blurry"]})").reasons,
              std::vector<std::string>{"blurry"});
    for (const char* bad : {"", "[]", "{}", R"({"pass": "yes"})", R"({"pass": false})",
                            R"({"pass": true, "reasons": "x"})", R"({"pass": true, "reasons": [1]})"}) {
        EXPECT_THROW(parse_judge_response(bad), Error) << bad;
    }
}

TEST(Gate, MakeJudgeSpecs) {
    EXPECT_NE(make_judge("stub"), nullptr);
    EXPECT_NE(make_judge("stub:0.25"), nullptr);
    EXPECT_THROW(make_judge("stub:x"), Error);
    EXPECT_THROW(make_judge("https://example.com"), Error);
    EXPECT_THROW(make_judge("http://"), Error);
}

class HttpJudgeTest : public ::testing::Test {
protected:
    void SetUp() override {
        server.Post("/judge", [this](const httplib::Request& req, httplib::Response& res) {
            const int n = calls.fetch_add(1);
            last_body = req.body;
            if (n < fail_first) {
                res.status = fail_status;
                return;
            }
            res.set_content(reply, "application/json");
            res.status = status;
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    void TearDown() override {
        server.stop();
        thread.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port) + "/judge"; }
    HttpJudgeOptions fast() const { return {std::chrono::milliseconds(2000), 3, std::chrono::milliseconds(1)}; }

    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::atomic<int> calls{0};
    int fail_first = 0;
    int fail_status = 503;
    int status = 200;
    std::string reply = R"({"pass": true, "reasons": []})";
    std::string last_body;
};

TEST_F(HttpJudgeTest, SendsMediaAndReadsVerdict) {
    HttpJudge judge(url(), fast());
    const auto sample = image_sample("img", 4, 5);
    const auto verdicts = judge_pair(sample, judge);
    ASSERT_EQ(verdicts.size(), 1u);
    EXPECT_TRUE(verdicts[0].pass);
    const auto body = json::parse(last_body);
    EXPECT_EQ(body.at("sample_id"), "img");
    EXPECT_EQ(body.at("instruction"), "add a cat");
    EXPECT_FALSE(body.contains("frame_index"));
    EXPECT_EQ(body.at("source_media"), base64_encode(encode_png(sample.source[0])));
}

TEST_F(HttpJudgeTest, RetriesServerErrorsAndRateLimits) {
    for (int code : {503, 429}) {
        calls = 0;
        fail_first = 2;
        fail_status = code;
        HttpJudge judge(url(), fast());
        EXPECT_TRUE(judge.judge({"a", "b", 0, 3, {}, {}}).pass);
        EXPECT_EQ(calls.load(), 3);
    }
    calls = 0;
    fail_first = 10;
    HttpJudge judge(url(), fast());
    EXPECT_THROW(judge.judge({"a", "b", 0, std::nullopt, {}, {}}), Error);
    EXPECT_EQ(calls.load(), 4);
}

TEST_F(HttpJudgeTest, MalformedRepliesAndClientErrorsDeferTheSample) {
    reply = "not json";
    HttpJudge judge(url(), fast());
    EXPECT_THROW(judge.judge({"a", "b", 0, std::nullopt, {}, {}}), Error);
    GateConfig config;
    config.ssim = {0.0, std::nullopt};
    const auto r = gate_sample(image_sample("m", 1, 2), config, judge);
    EXPECT_EQ(r.outcome, GateOutcome::deferred);
    EXPECT_TRUE(make_rejection(image_sample("m", 1, 2), r).deferred);

    reply = R"({"pass": true})";
    status = 400;
    calls = 0;
    EXPECT_THROW(judge.judge({"a", "b", 0, std::nullopt, {}, {}}), Error);
    EXPECT_EQ(calls.load(), 1);
}

TEST(HttpJudge, UnreachableServerIsReported) {
    httplib::Server probe;
    const int port = probe.bind_to_any_port("127.0.0.1");
    probe.stop();
    HttpJudge judge("http://127.0.0.1:" + std::to_string(port) + "/j",
                    {std::chrono::milliseconds(300), 1, std::chrono::milliseconds(1)});
    try {
        judge.judge({"a", "b", 0, std::nullopt, {}, {}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("judge unavailable"), std::string::npos) << e.what();
    }
}

TEST(Rejection, JsonRoundTrip) {
    Rejection r{"7-00000001", "judge", 0.61, std::vector<bool>{true, false}, true, "why"};
    EXPECT_EQ(rejection_from_json(to_json(r)), r);
    Rejection bare{"7-00000002", "generate", std::nullopt, std::nullopt, false, ""};
    EXPECT_EQ(to_json(bare), (json{{"sample_id", "7-00000002"}, {"stage", "generate"}}));
    EXPECT_EQ(rejection_from_json(to_json(bare)), bare);
}

TEST(Filter, OutputIsOrderedByIdAndIndependentOfInputOrder) {
    StubJudge judge(0.5, 3);
    GateConfig config;
    config.ssim = {0.0, std::nullopt};
    std::vector<EditSample> samples;
    for (int i = 0; i < 12; ++i) samples.push_back(image_sample("s" + std::to_string(11 - i), i, i + 50));
    const auto ids = [](const FilterResult& r) {
        std::vector<std::string> out;
        for (const auto* s : r.accepted) out.push_back(s->sample_id);
        return out;
    };
    const auto a = filter_dataset(samples, config, judge);
    const auto a_ids = ids(a);
    std::reverse(samples.begin(), samples.end());
    const auto b = filter_dataset(samples, config, judge);
    EXPECT_EQ(a.accepted.size() + a.rejections.size(), 12u);
    EXPECT_EQ(a_ids, ids(b));
    EXPECT_TRUE(std::is_sorted(a_ids.begin(), a_ids.end()));
    EXPECT_EQ(a.rejections, b.rejections);
    EXPECT_TRUE(std::is_sorted(a.rejections.begin(), a.rejections.end(),
                               [](const auto& x, const auto& y) { return x.sample_id < y.sample_id; }));
}
