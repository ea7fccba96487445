#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "collagen/edit_synth.hpp"
#include "collagen/image.hpp"
#include "collagen/media_io.hpp"

namespace collagen {

/// BT.601 luma.
LumaImage to_luma(const RgbImage& image);

/// Mean SSIM and mean contrast-structure term over all valid 11x11 windows.
struct SsimTerms {
    double ssim = 0.0;
    double cs = 0.0;
};

SsimTerms ssim_terms(const LumaImage& a, const LumaImage& b);
double ssim_single_scale(const LumaImage& a, const LumaImage& b);

inline constexpr std::array<double, 5> kMsSsimWeights{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

/// Scales usable for a given shorter side (every level keeps an 11x11 window).
int ms_ssim_scale_count(int min_side);

enum class GateVerdict { accept, reject };

struct SsimThresholds {
    double min = 0.5;
    std::optional<double> max;  ///< rejects near-identical pairs when set

    GateVerdict apply(double score) const {
        return score >= min && (!max || score <= *max) ? GateVerdict::accept : GateVerdict::reject;
    }
};

struct SsimReport {
    std::vector<double> per_scale_scores;  ///< cs per finer scale, full SSIM at the coarsest
    double composite = 0.0;
    std::optional<std::vector<double>> frame_scores;
    GateVerdict verdict = GateVerdict::reject;
    double threshold_used = 0.5;
};

SsimReport ms_ssim(const LumaImage& a, const LumaImage& b, const SsimThresholds& thresholds = {});
SsimReport ms_ssim(const RgbImage& a, const RgbImage& b, const SsimThresholds& thresholds = {});

/// round(i * (F - 1) / 4) for i = 0..4.
std::array<int, 5> video_frame_indices(int frame_count);

SsimReport ms_ssim_video(const Frames& source, const Frames& target, const SsimThresholds& thresholds = {});

struct JudgeVerdict {
    bool pass = false;
    std::vector<std::string> reasons;
    std::optional<int> frame_index;

    friend bool operator==(const JudgeVerdict&, const JudgeVerdict&) = default;
};

struct JudgeRequest {
    std::string sample_id;
    std::string instruction;
    int ordinal = 0;  ///< position among the sample's judge calls
    std::optional<int> frame_index;
    Bytes source_png;
    Bytes target_png;
};

class JudgeClient {
public:
    virtual ~JudgeClient() = default;
    virtual JudgeVerdict judge(const JudgeRequest& request) = 0;
    /// False when the client ignores media, letting callers skip encoding.
    virtual bool wants_media() const { return true; }
};

/// Offline judge. Verdicts come from an explicit per-sample table when one
/// is set, otherwise from a keyed hash of (sample_id, ordinal).
class StubJudge final : public JudgeClient {
public:
    explicit StubJudge(double pass_rate = 0.9, std::uint64_t key = 0);

    void set_verdicts(const std::string& sample_id, std::vector<bool> verdicts);
    JudgeVerdict judge(const JudgeRequest& request) override;
    bool wants_media() const override { return false; }

private:
    double pass_rate_;
    std::uint64_t key_;
    std::mutex mutex_;
    std::map<std::string, std::vector<bool>> table_;
};

struct HttpJudgeOptions {
    std::chrono::milliseconds timeout{10000};
    int retries = 3;
    std::chrono::milliseconds backoff{200};  ///< doubled after each failed attempt
};

/// POSTs {sample_id, instruction, source_media, target_media, frame_index?}
/// as JSON (media base64 PNG) and expects {pass, reasons}.
class HttpJudge final : public JudgeClient {
public:
    explicit HttpJudge(std::string url, HttpJudgeOptions options = {});
    JudgeVerdict judge(const JudgeRequest& request) override;

private:
    std::string base_;
    std::string path_;
    HttpJudgeOptions options_;
};

nlohmann::json judge_request_json(const JudgeRequest& request);
/// Throws Error("malformed judge response") on schema violations.
JudgeVerdict parse_judge_response(std::string_view body);

/// "stub", "stub:<pass rate>" or an http:// URL.
std::unique_ptr<JudgeClient> make_judge(const std::string& spec, const HttpJudgeOptions& options = {});

/// One verdict for an image sample, five (one per sampled frame) for video.
std::vector<JudgeVerdict> judge_pair(const EditSample& sample, JudgeClient& client);

struct GateConfig {
    SsimThresholds ssim;
    int min_video_passes = 4;
};

enum class GateOutcome { accepted, rejected, deferred };

struct GateResult {
    GateOutcome outcome = GateOutcome::rejected;
    std::string stage;  ///< "ssim" or "judge" when not accepted
    SsimReport ssim;
    std::vector<JudgeVerdict> verdicts;
    std::string reason;
};

GateResult gate_sample(const EditSample& sample, const GateConfig& config, JudgeClient& judge);

/// Rejection log line.
struct Rejection {
    std::string sample_id;
    std::string stage;  ///< ssim, judge or generate
    std::optional<double> score;
    std::optional<std::vector<bool>> verdicts;
    bool deferred = false;
    std::string reason;

    friend bool operator==(const Rejection&, const Rejection&) = default;
};

nlohmann::json to_json(const Rejection& rejection);
Rejection rejection_from_json(const nlohmann::json& j);
Rejection make_rejection(const EditSample& sample, const GateResult& result);

struct FilterResult {
    std::vector<const EditSample*> accepted;
    std::vector<Rejection> rejections;
};

/// Gates every sample. Both outputs are ordered by sample id, so the result
/// does not depend on input order.
FilterResult filter_dataset(const std::vector<EditSample>& samples, const GateConfig& config, JudgeClient& judge);

}  // namespace collagen
