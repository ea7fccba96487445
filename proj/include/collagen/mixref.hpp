#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace collagen::mixref {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Row-wise softmax((q k^T) / sqrt(d_head)) v over K = [k_tar; k_src],
/// V = [v_tar; v_src], evaluated per head on column slices.
Matrix mixed_attention(const Matrix& q, const Matrix& k_tar, const Matrix& v_tar, const Matrix& k_src,
                       const Matrix& v_src, int heads = 1);

/// Attention weights of the same computation, one matrix per head.
std::vector<Matrix> mixed_attention_weights(const Matrix& q, const Matrix& k_tar, const Matrix& k_src,
                                            int heads = 1);

/// Noise-only variant: q = Q^n_tar, K = [K^n_tar; K^n_src].
Matrix self_mixed_attention(const Matrix& q_n_tar, const Matrix& k_n_tar, const Matrix& v_n_tar,
                            const Matrix& k_n_src, const Matrix& v_n_src, int heads = 1);

/// Plain attention (no source stream).
Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v, int heads = 1);

enum class MixVariant { joint_mmdit, self_attention };

inline constexpr int kImageMixLayers = 18;
inline constexpr int kVideoMixLayers = 13;
inline constexpr int kSelfAttentionMixLayers = 2;

struct MixingConfig {
    int n_mix_layers = kImageMixLayers;
    MixVariant variant = MixVariant::joint_mmdit;
    int total_layers = 0;  ///< 0 means "the model's depth"
    bool shared_init_noise = true;

    static MixingConfig image() { return {kImageMixLayers, MixVariant::joint_mmdit, 0, true}; }
    static MixingConfig video() { return {kVideoMixLayers, MixVariant::joint_mmdit, 0, true}; }
    static MixingConfig self_attention() { return {kSelfAttentionMixLayers, MixVariant::self_attention, 0, true}; }
};

enum class InjectionScheme { none, token_concat_early_drop, channel_concat };

struct InjectionConfig {
    InjectionScheme scheme = InjectionScheme::none;
    int drop_after_block = 4;
    int cond_channels = 64;  ///< width of the condition latent for channel_concat
};

struct ModelConfig {
    int width = 64;
    int heads = 4;
    int depth = 8;
    int ff_multiplier = 2;
    int cond_channels = 64;
    std::uint64_t seed = 0;
};

/// Seeded toy transformer. Each block has separate noise and text
/// projections (condition tokens use the noise weights), pre-norm residual
/// attention, a text cross-attention for the self-attention variant, and a
/// two-layer feed-forward per stream.
class ToyModel {
public:
    explicit ToyModel(ModelConfig config = {});

    const ModelConfig& config() const { return config_; }
    int width() const { return config_.width; }
    int heads() const { return config_.heads; }
    int depth() const { return config_.depth; }

    struct Stream {
        Matrix wq, wk, wv, wo, ff1, ff2;
    };
    struct Block {
        Stream noise;
        Stream text;
        Matrix cross_q, cross_k, cross_v, cross_o;
    };

    const Block& block(int layer) const;  ///< 1-based
    const Matrix& fuse() const { return fuse_; }
    const Matrix& head_out() const { return head_out_; }

private:
    ModelConfig config_;
    std::vector<Block> blocks_;
    Matrix fuse_;      ///< (width + cond_channels) x width
    Matrix head_out_;  ///< width x width velocity readout
};

struct TokenBlockInput {
    Matrix noise_tokens;
    Matrix text_tokens;
    std::optional<Matrix> cond_tokens;
    int head_count = 4;
};

/// Noise-token keys and values of one block, as read by a mixing target.
struct NoiseKv {
    Matrix k;
    Matrix v;
};

struct BlockTrace {
    int layer = 0;
    int sequence_length = 0;  ///< tokens entering the block's own attention
    int key_length = 0;       ///< keys attended, including source tokens
    int cond_tokens = 0;
    bool read_source_kv = false;
};

struct BlockOutput {
    TokenBlockInput tokens;
    NoiseKv noise_kv;
    BlockTrace trace;
};

/// One transformer block. `layer` is 1-based.
BlockOutput block_forward(const ToyModel& model, int layer, const TokenBlockInput& input,
                          const NoiseKv* mix_kv = nullptr, const InjectionConfig& injection = {},
                          MixVariant variant = MixVariant::joint_mmdit);

/// Width-wise [noise | cond] followed by the seeded projection back to d.
Matrix fuse_channel_condition(const ToyModel& model, const Matrix& noise, const Matrix& cond);

/// Runs all blocks under an injection scheme and returns per-block traces.
struct ForwardResult {
    TokenBlockInput tokens;
    std::vector<BlockTrace> traces;
};
ForwardResult forward(const ToyModel& model, TokenBlockInput input, const InjectionConfig& injection);

/// Seeded standard-normal caption embedding (no text encoder).
Matrix caption_embedding(std::uint64_t seed, int tokens, int width);
Matrix gaussian_noise(std::uint64_t seed, int tokens, int width);

struct BranchResult {
    Matrix initial;
    Matrix output;
    std::vector<BlockTrace> traces;  ///< every block of every step
};

struct PairedResult {
    BranchResult source;
    BranchResult target;
};

struct SamplerConfig {
    int steps = 4;
    int noise_tokens = 16;
    std::uint64_t noise_seed = 0;
};

/// Euler integration of both branches from t = 1 to t = 0. The target
/// branch attends to the source branch's same-layer noise K/V in blocks
/// 1..N; the source branch never reads the target.
PairedResult paired_generate(const ToyModel& model, const Matrix& src_caption, const Matrix& tar_caption,
                             const MixingConfig& mix, const SamplerConfig& sampler);

/// A single unpaired branch.
BranchResult solo_generate(const ToyModel& model, const Matrix& caption, MixVariant variant,
                           const SamplerConfig& sampler);

struct PropertyResult {
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

/// The full invariant suite behind `verify-mix`.
std::vector<PropertyResult> run_property_suite(std::uint64_t seed = 0);

}  // namespace collagen::mixref
