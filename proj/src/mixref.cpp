#include "collagen/mixref.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>

#include "collagen/rng.hpp"

namespace collagen::mixref {

namespace {

Matrix vstack(std::initializer_list<const Matrix*> parts) {
    Eigen::Index rows = 0;
    Eigen::Index cols = -1;
    for (const auto* p : parts) {
        if (p->rows() == 0) continue;
        if (cols >= 0 && p->cols() != cols) throw Error("token widths disagree");
        cols = p->cols();
        rows += p->rows();
    }
    Matrix out(rows, cols < 0 ? 0 : cols);
    Eigen::Index at = 0;
    for (const auto* p : parts) {
        if (p->rows() == 0) continue;
        out.middleRows(at, p->rows()) = *p;
        at += p->rows();
    }
    return out;
}

void check_attention(const Matrix& q, const Matrix& k_tar, const Matrix& v_tar, const Matrix& k_src,
                     const Matrix& v_src, int heads) {
    if (q.rows() == 0) throw Error("attention with no queries");
    if (heads <= 0 || q.cols() % heads != 0) throw Error("width not divisible by head count");
    if (k_tar.cols() != q.cols() || (k_src.rows() > 0 && k_src.cols() != q.cols())) {
        throw Error("query and key widths disagree");
    }
    if (k_tar.rows() != v_tar.rows() || k_src.rows() != v_src.rows()) throw Error("key and value counts disagree");
    if (v_src.rows() > 0 && v_src.cols() != v_tar.cols()) throw Error("value widths disagree");
    if (v_tar.cols() % heads != 0) throw Error("value width not divisible by head count");
    if (k_tar.rows() + k_src.rows() == 0) throw Error("attention with no keys");
}

Matrix softmax_rows(Matrix s) {
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
        const double m = s.row(r).maxCoeff();
        s.row(r) = (s.row(r).array() - m).exp();
        s.row(r) /= s.row(r).sum();
    }
    return s;
}

Matrix layer_norm(const Matrix& x) {
    Matrix out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double mean = x.row(r).mean();
        const double var = (x.row(r).array() - mean).square().mean();
        out.row(r) = (x.row(r).array() - mean) / std::sqrt(var + 1e-5);
    }
    return out;
}

Matrix seeded_matrix(Rng& rng, int rows, int cols, double scale) {
    Matrix m(rows, cols);
    for (int c = 0; c < cols; ++c) {
        for (int r = 0; r < rows; ++r) m(r, c) = rng.normal() * scale;
    }
    return m;
}

ToyModel::Stream make_stream(Rng& rng, int d, int ff) {
    const double s = 1.0 / std::sqrt(static_cast<double>(d));
    return {seeded_matrix(rng, d, d, s),       seeded_matrix(rng, d, d, s),
            seeded_matrix(rng, d, d, s),       seeded_matrix(rng, d, d, 0.5 * s),
            seeded_matrix(rng, d, ff, s),      seeded_matrix(rng, ff, d, 0.5 / std::sqrt(static_cast<double>(ff)))};
}

Matrix feed_forward(const Matrix& x, const ToyModel::Stream& s) {
    return (layer_norm(x) * s.ff1).array().tanh().matrix() * s.ff2;
}

Vector time_embedding(double t, int width) {
    Vector e(width);
    const int half = width / 2;
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(1000.0) * i / std::max(1, half));
        e(2 * i) = std::sin(1000.0 * t * freq);
        if (2 * i + 1 < width) e(2 * i + 1) = std::cos(1000.0 * t * freq);
    }
    if (width % 2 == 1) e(width - 1) = t;
    return e;
}

}  // namespace

std::vector<Matrix> mixed_attention_weights(const Matrix& q, const Matrix& k_tar, const Matrix& k_src, int heads) {
    const Matrix v_tar = Matrix::Zero(k_tar.rows(), q.cols());
    const Matrix v_src = Matrix::Zero(k_src.rows(), k_src.rows() ? q.cols() : 0);
    check_attention(q, k_tar, v_tar, k_src, v_src, heads);
    const Matrix k = vstack({&k_tar, &k_src});
    const int dh = static_cast<int>(q.cols()) / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<Matrix> out;
    for (int h = 0; h < heads; ++h) {
        out.push_back(softmax_rows((q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose()) * scale));
    }
    return out;
}

Matrix mixed_attention(const Matrix& q, const Matrix& k_tar, const Matrix& v_tar, const Matrix& k_src,
                       const Matrix& v_src, int heads) {
    check_attention(q, k_tar, v_tar, k_src, v_src, heads);
    const Matrix k = vstack({&k_tar, &k_src});
    const Matrix v = vstack({&v_tar, &v_src});
    const int dh = static_cast<int>(q.cols()) / heads;
    const int dv = static_cast<int>(v.cols()) / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Matrix out(q.rows(), v.cols());
    for (int h = 0; h < heads; ++h) {
        const Matrix p = softmax_rows((q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose()) * scale);
        out.middleCols(h * dv, dv) = p * v.middleCols(h * dv, dv);
    }
    return out;
}

Matrix self_mixed_attention(const Matrix& q_n_tar, const Matrix& k_n_tar, const Matrix& v_n_tar,
                            const Matrix& k_n_src, const Matrix& v_n_src, int heads) {
    return mixed_attention(q_n_tar, k_n_tar, v_n_tar, k_n_src, v_n_src, heads);
}

Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v, int heads) {
    return mixed_attention(q, k, v, Matrix(0, q.cols()), Matrix(0, v.cols()), heads);
}

ToyModel::ToyModel(ModelConfig config) : config_(config) {
    if (config_.width <= 0 || config_.heads <= 0 || config_.width % config_.heads != 0) {
        throw Error("model width must be a positive multiple of the head count");
    }
    if (config_.depth <= 0) throw Error("model depth must be positive");
    const int d = config_.width;
    const int ff = d * config_.ff_multiplier;
    const double s = 1.0 / std::sqrt(static_cast<double>(d));
    for (int layer = 1; layer <= config_.depth; ++layer) {
        Rng rng(RngState{config_.seed, static_cast<std::uint64_t>(layer)});
        Block b;
        b.noise = make_stream(rng, d, ff);
        b.text = make_stream(rng, d, ff);
        b.cross_q = seeded_matrix(rng, d, d, s);
        b.cross_k = seeded_matrix(rng, d, d, s);
        b.cross_v = seeded_matrix(rng, d, d, s);
        b.cross_o = seeded_matrix(rng, d, d, 0.5 * s);
        blocks_.push_back(std::move(b));
    }
    Rng rng(RngState{config_.seed, 0});
    fuse_ = seeded_matrix(rng, d + config_.cond_channels, d, 1.0 / std::sqrt(static_cast<double>(d + config_.cond_channels)));
    head_out_ = seeded_matrix(rng, d, d, s);
}

const ToyModel::Block& ToyModel::block(int layer) const {
    if (layer < 1 || layer > config_.depth) throw Error("block index out of range");
    return blocks_[static_cast<std::size_t>(layer - 1)];
}

Matrix fuse_channel_condition(const ToyModel& model, const Matrix& noise, const Matrix& cond) {
    if (noise.cols() != model.width()) throw Error("noise width disagrees with the model");
    if (cond.cols() != model.config().cond_channels) throw Error("condition width disagrees with cond_channels");
    if (cond.rows() != noise.rows()) throw Error("channel concatenation needs one condition token per noise token");
    Matrix stacked(noise.rows(), noise.cols() + cond.cols());
    stacked << noise, cond;
    return stacked * model.fuse();
}

BlockOutput block_forward(const ToyModel& model, int layer, const TokenBlockInput& input, const NoiseKv* mix_kv,
                          const InjectionConfig& injection, MixVariant variant) {
    const auto& b = model.block(layer);
    const int d = model.width();
    if (input.head_count != model.heads()) throw Error("head count disagrees with the model");
    if (input.noise_tokens.cols() != d || input.text_tokens.cols() != d ||
        (input.cond_tokens && input.cond_tokens->cols() != d)) {
        throw Error("token width disagrees with the model");
    }
    const bool cond_phase =
        injection.scheme == InjectionScheme::token_concat_early_drop && layer <= injection.drop_after_block;
    if (injection.scheme == InjectionScheme::token_concat_early_drop &&
        (injection.drop_after_block < 1 || injection.drop_after_block > model.depth())) {
        throw Error("drop_after_block outside [1, L]");
    }
    if (input.cond_tokens && !cond_phase) throw Error("condition tokens after drop");
    if (cond_phase && !input.cond_tokens) throw Error("condition tokens missing before drop");
    if (mix_kv && (mix_kv->k.cols() != d || mix_kv->v.cols() != d)) throw Error("source K/V width disagrees");

    const Matrix empty(0, d);
    const Matrix& xn = input.noise_tokens;
    const Matrix& xc = input.cond_tokens ? *input.cond_tokens : empty;
    const Matrix& xt = input.text_tokens;
    const auto tn = xn.rows(), tc = xc.rows(), tt = xt.rows();
    const Matrix& ks = mix_kv ? mix_kv->k : empty;
    const Matrix& vs = mix_kv ? mix_kv->v : empty;

    const Matrix ln_n = layer_norm(xn);
    const Matrix ln_c = layer_norm(xc);
    const Matrix qn = ln_n * b.noise.wq, kn = ln_n * b.noise.wk, vn = ln_n * b.noise.wv;
    const Matrix qc = ln_c * b.noise.wq, kc = ln_c * b.noise.wk, vc = ln_c * b.noise.wv;

    BlockOutput out;
    out.noise_kv = {kn, vn};
    out.trace.layer = layer;
    out.trace.cond_tokens = static_cast<int>(tc);
    out.trace.read_source_kv = mix_kv != nullptr;

    Matrix new_n, new_c, new_t;
    if (variant == MixVariant::joint_mmdit) {
        const Matrix ln_t = layer_norm(xt);
        const Matrix qt = ln_t * b.text.wq, kt = ln_t * b.text.wk, vt = ln_t * b.text.wv;
        const Matrix q = vstack({&qn, &qc, &qt});
        const Matrix k = vstack({&kn, &kc, &kt});
        const Matrix v = vstack({&vn, &vc, &vt});
        out.trace.sequence_length = static_cast<int>(q.rows());
        out.trace.key_length = static_cast<int>(k.rows() + ks.rows());
        const Matrix o = mixed_attention(q, k, v, ks, vs, model.heads());
        new_n = xn + o.topRows(tn) * b.noise.wo;
        new_c = xc + o.middleRows(tn, tc) * b.noise.wo;
        new_t = xt + o.bottomRows(tt) * b.text.wo;
        new_t += feed_forward(new_t, b.text);
    } else {
        const Matrix q = vstack({&qn, &qc});
        const Matrix k = vstack({&kn, &kc});
        const Matrix v = vstack({&vn, &vc});
        out.trace.sequence_length = static_cast<int>(q.rows());
        out.trace.key_length = static_cast<int>(k.rows() + ks.rows());
        const Matrix o = self_mixed_attention(q, k, v, ks, vs, model.heads());
        Matrix x = vstack({&xn, &xc}) + o * b.noise.wo;
        const Matrix cross = attention(layer_norm(x) * b.cross_q, xt * b.cross_k, xt * b.cross_v, model.heads());
        x += cross * b.cross_o;
        new_n = x.topRows(tn);
        new_c = x.bottomRows(tc);
        new_t = xt;
    }
    new_n += feed_forward(new_n, b.noise);
    if (tc > 0) new_c += feed_forward(new_c, b.noise);

    out.tokens.noise_tokens = std::move(new_n);
    out.tokens.text_tokens = std::move(new_t);
    out.tokens.head_count = input.head_count;
    if (cond_phase && layer < injection.drop_after_block) out.tokens.cond_tokens = std::move(new_c);
    return out;
}

ForwardResult forward(const ToyModel& model, TokenBlockInput input, const InjectionConfig& injection) {
    ForwardResult result;
    if (injection.scheme == InjectionScheme::channel_concat) {
        if (!input.cond_tokens) throw Error("channel concatenation needs condition tokens");
        input.noise_tokens = fuse_channel_condition(model, input.noise_tokens, *input.cond_tokens);
        input.cond_tokens.reset();
    }
    for (int layer = 1; layer <= model.depth(); ++layer) {
        auto out = block_forward(model, layer, input, nullptr, injection);
        result.traces.push_back(out.trace);
        input = std::move(out.tokens);
    }
    result.tokens = std::move(input);
    return result;
}

Matrix caption_embedding(std::uint64_t seed, int tokens, int width) {
    Rng rng(RngState{seed, 0xCA97u});
    return seeded_matrix(rng, tokens, width, 1.0);
}

Matrix gaussian_noise(std::uint64_t seed, int tokens, int width) {
    Rng rng(RngState{seed, 0x401Eu});
    return seeded_matrix(rng, tokens, width, 1.0);
}

namespace {

Matrix velocity(const ToyModel& model, const Matrix& x, const Matrix& caption, double t, MixVariant variant,
                int n_mix, const std::vector<NoiseKv>* source_kv, std::vector<NoiseKv>* capture,
                std::vector<BlockTrace>& traces) {
    TokenBlockInput tokens{x.rowwise() + time_embedding(t, model.width()).transpose(), caption, std::nullopt,
                           model.heads()};
    for (int layer = 1; layer <= model.depth(); ++layer) {
        const NoiseKv* mix = source_kv && layer <= n_mix ? &(*source_kv)[static_cast<std::size_t>(layer - 1)] : nullptr;
        auto out = block_forward(model, layer, tokens, mix, {}, variant);
        traces.push_back(out.trace);
        if (capture) capture->push_back(std::move(out.noise_kv));
        tokens = std::move(out.tokens);
    }
    return layer_norm(tokens.noise_tokens) * model.head_out();
}

void check_caption(const ToyModel& model, const Matrix& caption) {
    if (caption.cols() != model.width() || caption.rows() == 0) throw Error("caption embedding width disagrees");
}

void check_sampler(const SamplerConfig& sampler) {
    if (sampler.steps < 1) throw Error("sampler needs at least one step");
    if (sampler.noise_tokens < 1) throw Error("sampler needs at least one noise token");
}

}  // namespace

PairedResult paired_generate(const ToyModel& model, const Matrix& src_caption, const Matrix& tar_caption,
                             const MixingConfig& mix, const SamplerConfig& sampler) {
    check_caption(model, src_caption);
    check_caption(model, tar_caption);
    check_sampler(sampler);
    const int total = mix.total_layers > 0 ? mix.total_layers : model.depth();
    if (total != model.depth()) throw Error("mixing config depth disagrees with the model");
    if (mix.n_mix_layers < 0 || mix.n_mix_layers > total) throw Error("mixing layers must satisfy 0 <= N <= L");

    PairedResult r;
    r.source.initial = gaussian_noise(sampler.noise_seed, sampler.noise_tokens, model.width());
    r.target.initial = mix.shared_init_noise
                           ? r.source.initial
                           : gaussian_noise(splitmix64(sampler.noise_seed + 1), sampler.noise_tokens, model.width());
    Matrix xs = r.source.initial;
    Matrix xt = r.target.initial;
    const double dt = 1.0 / sampler.steps;
    for (int step = 0; step < sampler.steps; ++step) {
        const double t = 1.0 - step * dt;
        std::vector<NoiseKv> kv;
        const Matrix vs = velocity(model, xs, src_caption, t, mix.variant, 0, nullptr, &kv, r.source.traces);
        const Matrix vt = velocity(model, xt, tar_caption, t, mix.variant, mix.n_mix_layers,
                                   mix.n_mix_layers > 0 ? &kv : nullptr, nullptr, r.target.traces);
        xs -= dt * vs;
        xt -= dt * vt;
    }
    r.source.output = std::move(xs);
    r.target.output = std::move(xt);
    return r;
}

BranchResult solo_generate(const ToyModel& model, const Matrix& caption, MixVariant variant,
                           const SamplerConfig& sampler) {
    check_caption(model, caption);
    check_sampler(sampler);
    BranchResult r;
    r.initial = gaussian_noise(sampler.noise_seed, sampler.noise_tokens, model.width());
    Matrix x = r.initial;
    const double dt = 1.0 / sampler.steps;
    for (int step = 0; step < sampler.steps; ++step) {
        const double t = 1.0 - step * dt;
        x -= dt * velocity(model, x, caption, t, variant, 0, nullptr, nullptr, r.traces);
    }
    r.output = std::move(x);
    return r;
}

namespace {

Matrix random_matrix(Rng& rng, int rows, int cols) { return seeded_matrix(rng, rows, cols, 1.0); }

double max_abs(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return INFINITY;
    return a.size() ? (a - b).cwiseAbs().maxCoeff() : 0.0;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << v;
    return os.str();
}

using Check = std::function<std::string()>;  // empty string on success

PropertyResult run_check(const std::string& name, const Check& check) {
    PropertyResult r;
    r.name = name;
    const auto start = std::chrono::steady_clock::now();
    try {
        r.detail = check();
        r.passed = r.detail.empty();
        if (r.passed) r.detail = "ok";
    } catch (const std::exception& e) {
        r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

}  // namespace

std::vector<PropertyResult> run_property_suite(std::uint64_t seed) {
    std::vector<PropertyResult> results;
    const int heads_grid[] = {1, 2, 4};

    results.push_back(run_check("attention rows sum to one", [&] {
        Rng rng(RngState{seed, 1});
        double worst = 0.0;
        for (int heads : heads_grid) {
            const Matrix q = random_matrix(rng, 7, 8), kt = random_matrix(rng, 5, 8), ks = random_matrix(rng, 3, 8);
            for (const auto* src : {&ks, static_cast<const Matrix*>(nullptr)}) {
                const Matrix none(0, 8);
                for (const auto& w : mixed_attention_weights(q, kt, src ? *src : none, heads)) {
                    worst = std::max(worst, (w.rowwise().sum().array() - 1.0).abs().maxCoeff());
                }
            }
        }
        return worst <= 1e-6 ? std::string() : "max deviation " + fmt(worst);
    }));

    results.push_back(run_check("empty source reduces to plain attention", [&] {
        Rng rng(RngState{seed, 2});
        for (int heads : heads_grid) {
            const Matrix q = random_matrix(rng, 6, 8), k = random_matrix(rng, 9, 8), v = random_matrix(rng, 9, 8);
            const Matrix mixed = mixed_attention(q, k, v, Matrix(0, 8), Matrix(0, 8), heads);
            const Matrix self = self_mixed_attention(q, k, v, Matrix(0, 8), Matrix(0, 8), heads);
            if (max_abs(mixed, attention(q, k, v, heads)) != 0.0 || max_abs(self, mixed) != 0.0) {
                return "difference at " + std::to_string(heads) + " heads";
            }
        }
        return std::string();
    }));

    results.push_back(run_check("duplicated source leaves attention unchanged", [&] {
        Rng rng(RngState{seed, 3});
        double worst = 0.0;
        for (int heads : heads_grid) {
            const Matrix q = random_matrix(rng, 6, 8), k = random_matrix(rng, 9, 8), v = random_matrix(rng, 9, 8);
            worst = std::max(worst, max_abs(mixed_attention(q, k, v, k, v, heads), attention(q, k, v, heads)));
        }
        return worst <= 1e-6 ? std::string() : "max deviation " + fmt(worst);
    }));

    results.push_back(run_check("two-key closed form", [&] {
        Matrix q(1, 2), k(2, 2), v(2, 2);
        q << 1.0, 0.0;
        k << 0.0, 3.0, 0.0, -2.0;
        v << 1.0, 0.0, 0.0, 1.0;
        const Matrix out = mixed_attention(q, k.topRows(1), v.topRows(1), k.bottomRows(1), v.bottomRows(1));
        const double err = std::max(std::abs(out(0, 0) - 0.5), std::abs(out(0, 1) - 0.5));
        return err <= 1e-9 ? std::string() : "deviation " + fmt(err);
    }));

    const ToyModel model(ModelConfig{64, 4, 8, 2, 64, seed});
    const Matrix cap_a = caption_embedding(seed + 11, 8, 64);
    const Matrix cap_b = caption_embedding(seed + 12, 8, 64);
    const SamplerConfig sampler{3, 16, seed + 13};

    results.push_back(run_check("source branch isolation", [&] {
        for (auto mix : {MixingConfig{8, MixVariant::joint_mmdit, 0, true}, MixingConfig::self_attention()}) {
            const auto paired = paired_generate(model, cap_a, cap_b, mix, sampler);
            const auto solo = solo_generate(model, cap_a, mix.variant, sampler);
            if (!(paired.source.output == solo.output)) return std::string("source output depends on target branch");
        }
        return std::string();
    }));

    results.push_back(run_check("source K/V read only in the first N blocks", [&] {
        for (int n : {0, 2, 5, 8}) {
            const auto paired = paired_generate(model, cap_a, cap_b, {n, MixVariant::joint_mmdit, 0, true}, sampler);
            for (const auto& t : paired.target.traces) {
                if (t.read_source_kv != (t.layer <= n)) return "N=" + std::to_string(n) + " layer " + std::to_string(t.layer);
            }
            for (const auto& t : paired.source.traces) {
                if (t.read_source_kv) return std::string("source branch read mixed K/V");
            }
        }
        return std::string();
    }));

    results.push_back(run_check("shared initial noise", [&] {
        const auto paired = paired_generate(model, cap_a, cap_b, MixingConfig{4, MixVariant::joint_mmdit, 0, true}, sampler);
        return paired.source.initial == paired.target.initial ? std::string() : "initial latents differ";
    }));

    results.push_back(run_check("identical captions give identical branches", [&] {
        double worst = 0.0;
        for (int n : {0, 2, 8}) {
            const auto paired = paired_generate(model, cap_a, cap_a, {n, MixVariant::self_attention, 0, true}, sampler);
            worst = std::max(worst, max_abs(paired.source.output, paired.target.output));
        }
        const auto joint = paired_generate(model, cap_a, cap_a, {0, MixVariant::joint_mmdit, 0, true}, sampler);
        worst = std::max(worst, max_abs(joint.source.output, joint.target.output));
        return worst <= 1e-6 ? std::string() : "max deviation " + fmt(worst);
    }));

    results.push_back(run_check("joint mixing of identical noise adds log 2 to noise logits", [&] {
        Rng rng(RngState{seed, 7});
        double worst = 0.0;
        for (int heads : heads_grid) {
            const Matrix q = random_matrix(rng, 5, 8), kn = random_matrix(rng, 6, 8), vn = random_matrix(rng, 6, 8);
            const Matrix kt = random_matrix(rng, 3, 8), vt = random_matrix(rng, 3, 8);
            const Matrix k = vstack({&kn, &kt}), v = vstack({&vn, &vt});
            const Matrix mixed = mixed_attention(q, k, v, kn, vn, heads);
            const int dh = 8 / heads;
            for (int h = 0; h < heads; ++h) {
                Matrix s = q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose() / std::sqrt(double(dh));
                s.leftCols(6).array() += std::log(2.0);
                const Matrix expect = softmax_rows(s) * v.middleCols(h * dh, dh);
                worst = std::max(worst, max_abs(mixed.middleCols(h * dh, dh), expect));
            }
        }
        return worst <= 1e-9 ? std::string() : "max deviation " + fmt(worst);
    }));

    results.push_back(run_check("N = 0 equals solo generation", [&] {
        const auto paired = paired_generate(model, cap_a, cap_b, {0, MixVariant::joint_mmdit, 0, true}, sampler);
        const auto solo = solo_generate(model, cap_b, MixVariant::joint_mmdit, sampler);
        return paired.target.output == solo.output ? std::string() : "target differs from solo run";
    }));

    results.push_back(run_check("source caption reaches the target only through mixing", [&] {
        const Matrix cap_c = caption_embedding(seed + 14, 8, 64);
        const auto full_a = paired_generate(model, cap_a, cap_b, {8, MixVariant::joint_mmdit, 0, true}, sampler);
        const auto full_c = paired_generate(model, cap_c, cap_b, {8, MixVariant::joint_mmdit, 0, true}, sampler);
        const auto none_a = paired_generate(model, cap_a, cap_b, {0, MixVariant::joint_mmdit, 0, true}, sampler);
        const auto none_c = paired_generate(model, cap_c, cap_b, {0, MixVariant::joint_mmdit, 0, true}, sampler);
        const double with_mix = max_abs(full_a.target.output, full_c.target.output);
        if (!(with_mix > 1e-6)) return "mixing had no effect (" + fmt(with_mix) + ")";
        if (!(none_a.target.output == none_c.target.output)) return std::string("target depends on source without mixing");
        return std::string();
    }));

    results.push_back(run_check("early drop sequence lengths", [&] {
        Rng rng(RngState{seed, 4});
        TokenBlockInput in{random_matrix(rng, 16, 64), random_matrix(rng, 8, 64), random_matrix(rng, 16, 64), 4};
        const InjectionConfig inj{InjectionScheme::token_concat_early_drop, 4, 64};
        const auto fwd = forward(model, in, inj);
        for (const auto& t : fwd.traces) {
            const int want = t.layer <= 4 ? 40 : 24;
            if (t.sequence_length != want) return "block " + std::to_string(t.layer) + " length " + std::to_string(t.sequence_length);
        }
        if (fwd.tokens.cond_tokens || fwd.tokens.noise_tokens.rows() != 16 || fwd.tokens.text_tokens.rows() != 8) {
            return std::string("token counts not preserved");
        }
        return std::string();
    }));

    results.push_back(run_check("condition tokens rejected after drop", [&] {
        Rng rng(RngState{seed, 5});
        TokenBlockInput in{random_matrix(rng, 16, 64), random_matrix(rng, 8, 64), random_matrix(rng, 16, 64), 4};
        try {
            block_forward(model, 5, in, nullptr, {InjectionScheme::token_concat_early_drop, 4, 64});
        } catch (const Error& e) {
            if (std::string(e.what()) == "condition tokens after drop") return std::string();
            return std::string("wrong error: ") + e.what();
        }
        return std::string("no error raised");
    }));

    results.push_back(run_check("channel concat never materializes condition tokens", [&] {
        Rng rng(RngState{seed, 6});
        TokenBlockInput in{random_matrix(rng, 16, 64), random_matrix(rng, 8, 64), random_matrix(rng, 16, 64), 4};
        const auto fwd = forward(model, in, {InjectionScheme::channel_concat, 4, 64});
        for (const auto& t : fwd.traces) {
            if (t.cond_tokens != 0 || t.sequence_length != 24) return "block " + std::to_string(t.layer) + " saw condition tokens";
        }
        if (fwd.tokens.noise_tokens.cols() != 64) return std::string("fused width is not d");
        return std::string();
    }));

    results.push_back(run_check("default mixing depths", [&] {
        if (MixingConfig::image().n_mix_layers != 18 || MixingConfig::video().n_mix_layers != 13 ||
            MixingConfig::self_attention().n_mix_layers != 2) {
            return std::string("defaults changed");
        }
        const ToyModel deep(ModelConfig{64, 4, 20, 2, 64, seed});
        for (auto mix : {MixingConfig::image(), MixingConfig::video(), MixingConfig::self_attention()}) {
            const auto paired = paired_generate(deep, cap_a, cap_b, mix, {2, 16, seed});
            const auto solo = solo_generate(deep, cap_a, mix.variant, {2, 16, seed});
            if (!(paired.source.output == solo.output)) return std::string("source branch not isolated");
            for (const auto& t : paired.target.traces) {
                if (t.read_source_kv != (t.layer <= mix.n_mix_layers)) return std::string("wrong mixing boundary");
            }
        }
        return std::string();
    }));

    return results;
}

}  // namespace collagen::mixref
