#include "collagen/quality_gate.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <httplib.h>

namespace collagen {

using nlohmann::json;

LumaImage to_luma(const RgbImage& image) {
    LumaImage out(image.width(), image.height());
    const auto src = image.pixels();
    auto dst = out.pixels();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = 0.299 * src[i].r + 0.587 * src[i].g + 0.114 * src[i].b;
    }
    return out;
}

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = (0.01 * 255) * (0.01 * 255);
constexpr double kC2 = (0.03 * 255) * (0.03 * 255);

const std::array<double, kWindow>& gaussian_window() {
    static const auto window = [] {
        std::array<double, kWindow> g{};
        double sum = 0.0;
        for (int i = 0; i < kWindow; ++i) {
            const double d = i - kWindow / 2;
            g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
            sum += g[i];
        }
        for (auto& v : g) v /= sum;
        return g;
    }();
    return window;
}

LumaImage downsample(const LumaImage& img) {
    LumaImage out(img.width() / 2, img.height() / 2);
    for (int y = 0; y < out.height(); ++y) {
        const auto r0 = img.row(2 * y);
        const auto r1 = img.row(2 * y + 1);
        auto dst = out.row(y);
        for (int x = 0; x < out.width(); ++x) {
            dst[x] = 0.25 * (r0[2 * x] + r0[2 * x + 1] + r1[2 * x] + r1[2 * x + 1]);
        }
    }
    return out;
}

void check_pair(const LumaImage& a, const LumaImage& b) {
    if (a.extent() != b.extent()) throw Error("SSIM inputs differ in dimensions");
    if (a.width() < kWindow || a.height() < kWindow) throw Error("SSIM inputs smaller than 11x11");
}

}  // namespace

SsimTerms ssim_terms(const LumaImage& a, const LumaImage& b) {
    check_pair(a, b);
    const auto& g = gaussian_window();
    const int w = a.width();
    const int h = a.height();
    const int ow = w - kWindow + 1;
    const int oh = h - kWindow + 1;

    // Horizontal pass over the five moment images, interleaved per pixel.
    std::vector<double> horiz(static_cast<std::size_t>(h) * ow * 5);
    std::vector<double> xx(static_cast<std::size_t>(w)), yy(xx.size()), xy(xx.size());
    for (int y = 0; y < h; ++y) {
        const auto ra = a.row(y);
        const auto rb = b.row(y);
        for (int x = 0; x < w; ++x) {
            xx[x] = ra[x] * ra[x];
            yy[x] = rb[x] * rb[x];
            xy[x] = ra[x] * rb[x];
        }
        double* out = horiz.data() + static_cast<std::size_t>(y) * ow * 5;
        for (int x = 0; x < ow; ++x) {
            double m0 = 0, m1 = 0, m2 = 0, m3 = 0, m4 = 0;
            for (int k = 0; k < kWindow; ++k) {
                const double gk = g[k];
                m0 += gk * ra[x + k];
                m1 += gk * rb[x + k];
                m2 += gk * xx[x + k];
                m3 += gk * yy[x + k];
                m4 += gk * xy[x + k];
            }
            out[5 * x + 0] = m0;
            out[5 * x + 1] = m1;
            out[5 * x + 2] = m2;
            out[5 * x + 3] = m3;
            out[5 * x + 4] = m4;
        }
    }

    double ssim_sum = 0.0;
    double cs_sum = 0.0;
    std::vector<double> acc(static_cast<std::size_t>(ow) * 5);
    for (int y = 0; y < oh; ++y) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (int k = 0; k < kWindow; ++k) {
            const double gk = g[k];
            const double* in = horiz.data() + static_cast<std::size_t>(y + k) * ow * 5;
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += gk * in[i];
        }
        for (int x = 0; x < ow; ++x) {
            const double mx = acc[5 * x + 0];
            const double my = acc[5 * x + 1];
            const double vx = acc[5 * x + 2] - mx * mx;
            const double vy = acc[5 * x + 3] - my * my;
            const double cxy = acc[5 * x + 4] - mx * my;
            const double cs = (2.0 * cxy + kC2) / (vx + vy + kC2);
            cs_sum += cs;
            ssim_sum += (2.0 * mx * my + kC1) / (mx * mx + my * my + kC1) * cs;
        }
    }
    const double n = static_cast<double>(ow) * oh;
    return {ssim_sum / n, cs_sum / n};
}

double ssim_single_scale(const LumaImage& a, const LumaImage& b) { return ssim_terms(a, b).ssim; }

int ms_ssim_scale_count(int min_side) {
    int m = 0;
    while (m < static_cast<int>(kMsSsimWeights.size()) && (min_side >> m) >= kWindow) ++m;
    return m;
}

SsimReport ms_ssim(const LumaImage& a, const LumaImage& b, const SsimThresholds& thresholds) {
    check_pair(a, b);
    const int scales = ms_ssim_scale_count(std::min(a.width(), a.height()));
    double weight_sum = 0.0;
    for (int j = 0; j < scales; ++j) weight_sum += kMsSsimWeights[j];

    SsimReport report;
    LumaImage x = a;
    LumaImage y = b;
    double composite = 1.0;
    for (int j = 0; j < scales; ++j) {
        const auto terms = ssim_terms(x, y);
        const double s = j + 1 < scales ? terms.cs : terms.ssim;
        report.per_scale_scores.push_back(s);
        composite *= std::pow(std::max(0.0, s), kMsSsimWeights[j] / weight_sum);
        if (j + 1 < scales) {
            x = downsample(x);
            y = downsample(y);
        }
    }
    report.composite = std::clamp(composite, 0.0, 1.0);
    report.threshold_used = thresholds.min;
    report.verdict = thresholds.apply(report.composite);
    return report;
}

SsimReport ms_ssim(const RgbImage& a, const RgbImage& b, const SsimThresholds& thresholds) {
    return ms_ssim(to_luma(a), to_luma(b), thresholds);
}

std::array<int, 5> video_frame_indices(int frame_count) {
    if (frame_count < 5) throw Error("video needs at least 5 frames");
    std::array<int, 5> out{};
    for (int i = 0; i < 5; ++i) out[i] = static_cast<int>(std::lround(i * (frame_count - 1) / 4.0));
    return out;
}

SsimReport ms_ssim_video(const Frames& source, const Frames& target, const SsimThresholds& thresholds) {
    if (source.size() != target.size()) throw Error("video frame counts differ");
    SsimReport report;
    report.frame_scores.emplace();
    double sum = 0.0;
    for (int index : video_frame_indices(static_cast<int>(source.size()))) {
        const double s = ms_ssim(source[index], target[index]).composite;
        report.frame_scores->push_back(s);
        sum += s;
    }
    report.composite = std::clamp(sum / 5.0, 0.0, 1.0);
    report.threshold_used = thresholds.min;
    report.verdict = thresholds.apply(report.composite);
    return report;
}

StubJudge::StubJudge(double pass_rate, std::uint64_t key) : pass_rate_(pass_rate), key_(key) {
    if (!(pass_rate >= 0.0 && pass_rate <= 1.0)) throw Error("stub pass rate must lie in [0, 1]");
}

void StubJudge::set_verdicts(const std::string& sample_id, std::vector<bool> verdicts) {
    std::lock_guard lock(mutex_);
    table_[sample_id] = std::move(verdicts);
}

JudgeVerdict StubJudge::judge(const JudgeRequest& request) {
    JudgeVerdict v;
    v.frame_index = request.frame_index;
    {
        std::lock_guard lock(mutex_);
        if (const auto it = table_.find(request.sample_id); it != table_.end()) {
            if (request.ordinal < 0 || static_cast<std::size_t>(request.ordinal) >= it->second.size()) {
                throw Error("stub verdict table has no entry for call " + std::to_string(request.ordinal));
            }
            v.pass = it->second[static_cast<std::size_t>(request.ordinal)];
            if (!v.pass) v.reasons = {"stub verdict table"};
            return v;
        }
    }
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : request.sample_id) h = (h ^ c) * 0x100000001b3ULL;
    h = splitmix64(h ^ splitmix64(key_ + static_cast<std::uint64_t>(request.ordinal)));
    v.pass = static_cast<double>(h >> 11) * 0x1.0p-53 < pass_rate_;
    if (!v.pass) v.reasons = {"stub hash verdict"};
    return v;
}

HttpJudge::HttpJudge(std::string url, HttpJudgeOptions options) : options_(options) {
    constexpr std::string_view scheme = "http://";
    if (!url.starts_with(scheme)) throw Error("judge URL must start with http://");
    const auto slash = url.find('/', scheme.size());
    base_ = url.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : url.substr(slash);
    if (base_.size() == scheme.size()) throw Error("judge URL has no host");
}

json judge_request_json(const JudgeRequest& request) {
    json j = {{"sample_id", request.sample_id},
              {"instruction", request.instruction},
              {"source_media", base64_encode(request.source_png)},
              {"target_media", base64_encode(request.target_png)}};
    if (request.frame_index) j["frame_index"] = *request.frame_index;
    return j;
}

JudgeVerdict parse_judge_response(std::string_view body) {
    const auto j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("pass") || !j["pass"].is_boolean()) {
        throw Error("malformed judge response");
    }
    JudgeVerdict v;
    v.pass = j["pass"].get<bool>();
    if (j.contains("reasons")) {
        if (!j["reasons"].is_array()) throw Error("malformed judge response");
        for (const auto& r : j["reasons"]) {
            if (!r.is_string()) throw Error("malformed judge response");
            v.reasons.push_back(r.get<std::string>());
        }
    }
    if (!v.pass && v.reasons.empty()) throw Error("malformed judge response: failing verdict without reasons");
    return v;
}

JudgeVerdict HttpJudge::judge(const JudgeRequest& request) {
    const auto body = judge_request_json(request).dump();
    auto delay = options_.backoff;
    std::string last = "no attempt";
    for (int attempt = 0; attempt <= options_.retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(delay);
            delay *= 2;
        }
        httplib::Client client(base_);
        const auto secs = options_.timeout.count() / 1000;
        const auto usecs = (options_.timeout.count() % 1000) * 1000;
        client.set_connection_timeout(secs, usecs);
        client.set_read_timeout(secs, usecs);
        client.set_write_timeout(secs, usecs);
        const auto res = client.Post(path_, body, "application/json");
        if (!res) {
            last = httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500 || res->status == 429) {
            last = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) throw Error("judge rejected request: HTTP " + std::to_string(res->status));
        auto verdict = parse_judge_response(res->body);
        verdict.frame_index = request.frame_index;
        return verdict;
    }
    throw Error("judge unavailable (" + last + ")");
}

std::unique_ptr<JudgeClient> make_judge(const std::string& spec, const HttpJudgeOptions& options) {
    if (spec == "stub") return std::make_unique<StubJudge>();
    if (spec.starts_with("stub:")) {
        try {
            std::size_t used = 0;
            const double rate = std::stod(spec.substr(5), &used);
            if (used == spec.size() - 5) return std::make_unique<StubJudge>(rate);
        } catch (const std::logic_error&) {
        }
        throw Error("invalid stub judge spec '" + spec + "'");
    }
    if (spec.starts_with("http://")) return std::make_unique<HttpJudge>(spec, options);
    throw Error("judge must be 'stub', 'stub:<rate>' or an http:// URL");
}

std::vector<JudgeVerdict> judge_pair(const EditSample& sample, JudgeClient& client) {
    const bool media = client.wants_media();
    const auto request = [&](int ordinal, std::optional<int> frame, std::size_t at) {
        JudgeRequest r{sample.sample_id, sample.instruction, ordinal, frame, {}, {}};
        if (media) {
            r.source_png = encode_png(sample.source.at(at));
            r.target_png = encode_png(sample.target.at(at));
        }
        return r;
    };
    if (!std::holds_alternative<VideoShape>(sample.bin_or_shape)) {
        return {client.judge(request(0, std::nullopt, 0))};
    }
    std::vector<JudgeVerdict> out;
    const auto indices = video_frame_indices(static_cast<int>(sample.source.size()));
    for (int i = 0; i < 5; ++i) {
        auto v = client.judge(request(i, indices[i], static_cast<std::size_t>(indices[i])));
        v.frame_index = indices[i];
        out.push_back(std::move(v));
    }
    return out;
}

GateResult gate_sample(const EditSample& sample, const GateConfig& config, JudgeClient& judge) {
    GateResult result;
    const bool video = std::holds_alternative<VideoShape>(sample.bin_or_shape);
    if (sample.source.empty() || sample.source.size() != sample.target.size()) {
        throw Error("sample " + sample.sample_id + " has mismatched media");
    }
    result.ssim = video ? ms_ssim_video(sample.source, sample.target, config.ssim)
                        : ms_ssim(sample.source.front(), sample.target.front(), config.ssim);
    if (result.ssim.verdict == GateVerdict::reject) {
        result.stage = "ssim";
        return result;
    }
    try {
        result.verdicts = judge_pair(sample, judge);
    } catch (const Error& e) {
        result.outcome = GateOutcome::deferred;
        result.stage = "judge";
        result.reason = e.what();
        return result;
    }
    const auto passes = std::count_if(result.verdicts.begin(), result.verdicts.end(),
                                      [](const JudgeVerdict& v) { return v.pass; });
    const bool ok = video ? passes >= config.min_video_passes : passes == 1;
    if (ok) {
        result.outcome = GateOutcome::accepted;
    } else {
        result.stage = "judge";
        for (const auto& v : result.verdicts) {
            for (const auto& r : v.reasons) {
                if (!result.reason.empty()) result.reason += "; ";
                result.reason += r;
            }
        }
    }
    return result;
}

json to_json(const Rejection& r) {
    json j = {{"sample_id", r.sample_id}, {"stage", r.stage}};
    if (r.score) j["score"] = *r.score;
    if (r.verdicts) j["verdicts"] = *r.verdicts;
    if (r.deferred) j["deferred"] = true;
    if (!r.reason.empty()) j["reason"] = r.reason;
    return j;
}

Rejection rejection_from_json(const json& j) {
    Rejection r;
    r.sample_id = j.at("sample_id").get<std::string>();
    r.stage = j.at("stage").get<std::string>();
    if (j.contains("score")) r.score = j["score"].get<double>();
    if (j.contains("verdicts")) r.verdicts = j["verdicts"].get<std::vector<bool>>();
    r.deferred = j.value("deferred", false);
    r.reason = j.value("reason", std::string());
    return r;
}

Rejection make_rejection(const EditSample& sample, const GateResult& result) {
    Rejection r;
    r.sample_id = sample.sample_id;
    r.stage = result.stage;
    r.score = result.ssim.composite;
    if (!result.verdicts.empty()) {
        r.verdicts.emplace();
        for (const auto& v : result.verdicts) r.verdicts->push_back(v.pass);
    }
    r.deferred = result.outcome == GateOutcome::deferred;
    r.reason = result.reason;
    return r;
}

FilterResult filter_dataset(const std::vector<EditSample>& samples, const GateConfig& config, JudgeClient& judge) {
    std::vector<const EditSample*> order;
    for (const auto& s : samples) order.push_back(&s);
    std::sort(order.begin(), order.end(),
              [](const EditSample* a, const EditSample* b) { return a->sample_id < b->sample_id; });
    FilterResult out;
    for (const auto* s : order) {
        const auto result = gate_sample(*s, config, judge);
        if (result.outcome == GateOutcome::accepted) {
            out.accepted.push_back(s);
        } else {
            out.rejections.push_back(make_rejection(*s, result));
        }
    }
    return out;
}

}  // namespace collagen
