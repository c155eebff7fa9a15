#include "polseg/decoder.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace polseg {

namespace {

std::string block_prefix(int l) { return "dec.block" + std::to_string(l); }

void check_finite(const Mat& m, const std::string& layer) {
    if (!m.allFinite()) throw std::runtime_error("decoder: non-finite activation after " + layer);
}

}  // namespace

void DecoderConfig::validate() const {
    if (hidden < 2 || hidden % 2 != 0) throw std::invalid_argument("decoder: hidden must be even and >= 2");
    if (layers < 1) throw std::invalid_argument("decoder: layers must be >= 1");
    if (num_classes < 1) throw std::invalid_argument("decoder: num_classes must be >= 1");
    if (kernel < 1) throw std::invalid_argument("decoder: kernel must be >= 1");
    if (heads < 1) throw std::invalid_argument("decoder: heads must be >= 1");
    if (qk_dim() % heads != 0 || hidden % heads != 0)
        throw std::invalid_argument("decoder: key and value widths must divide evenly across heads");
    if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("decoder: dropout must be in [0,1)");
}

RowVec step_embed(int step, int dim) {
    if (dim <= 0 || dim % 2 != 0) throw std::invalid_argument("step_embed: dim must be a positive even number");
    if (step < 0) throw std::invalid_argument("step_embed: step must be >= 0");
    RowVec e(dim);
    for (int i = 0; i < dim / 2; ++i) {
        const double freq = std::pow(10000.0, -2.0 * i / dim);
        e(2 * i) = std::sin(step * freq);
        e(2 * i + 1) = std::cos(step * freq);
    }
    return e;
}

CrossAttentionOutput cross_attention_block(const ParameterSet& p, const CrossAttentionParams& blk, int heads,
                                           double dropout, const Mat& cond, const Mat& state, Rng* rng,
                                           CrossAttentionCache* cache) {
    if (cond.rows() != state.rows() || cond.cols() != state.cols())
        throw std::invalid_argument("cross_attention_block: conditional and state shapes differ");
    const Eigen::Index T = cond.rows();
    const Eigen::Index h = cond.cols();

    DropoutMask drop_in = DropoutMask::sample(T, h, dropout, rng);
    Mat conv_in = drop_in.apply(cond);
    Mat conv_pre = blk.conv.forward(p, conv_in);
    DropoutMask drop_out = DropoutMask::sample(T, conv_pre.cols(), dropout, rng);
    Mat conv_feat = drop_out.apply(relu(conv_pre));

    Mat joint(T, 2 * h);
    joint << cond, state;
    Mat q = blk.query.forward(p, joint);
    Mat k = blk.key.forward(p, joint);
    Mat v = blk.value.forward(p, conv_feat);

    const Eigen::Index dq = q.cols() / heads;
    const Eigen::Index dv = v.cols() / heads;
    const double inv = 1.0 / std::sqrt(static_cast<double>(dq));
    Mat attended(T, v.cols());
    std::vector<Mat> attn;
    for (int hd = 0; hd < heads; ++hd) {
        Mat scores = (q.middleCols(hd * dq, dq) * k.middleCols(hd * dq, dq).transpose()) * inv;
        Mat a = softmax_rows(scores);
        attended.middleCols(hd * dv, dv).noalias() = a * v.middleCols(hd * dv, dv);
        if (cache) attn.push_back(std::move(a));
    }

    CrossAttentionOutput out;
    out.cond = cond + conv_feat;
    out.state = state + cond + attended;
    if (cache) {
        cache->cond_in = cond;
        cache->state_in = state;
        cache->drop_in = std::move(drop_in);
        cache->conv_in = std::move(conv_in);
        cache->conv_pre = std::move(conv_pre);
        cache->drop_out = std::move(drop_out);
        cache->conv_feat = std::move(conv_feat);
        cache->joint = std::move(joint);
        cache->q = std::move(q);
        cache->k = std::move(k);
        cache->v = std::move(v);
        cache->attn = std::move(attn);
    }
    return out;
}

std::pair<Mat, Mat> cross_attention_block_backward(const ParameterSet& p, ParameterSet& grads,
                                                   const CrossAttentionParams& blk, int heads,
                                                   const CrossAttentionCache& c, const Mat& d_cond_out,
                                                   const Mat& d_state_out) {
    const Eigen::Index h = c.cond_in.cols();
    const Eigen::Index dq = c.q.cols() / heads;
    const Eigen::Index dv = c.v.cols() / heads;
    const double inv = 1.0 / std::sqrt(static_cast<double>(dq));

    Mat dq_all(c.q.rows(), c.q.cols());
    Mat dk_all(c.k.rows(), c.k.cols());
    Mat dv_all(c.v.rows(), c.v.cols());
    for (int hd = 0; hd < heads; ++hd) {
        const Mat& a = c.attn[static_cast<std::size_t>(hd)];
        const auto d_att = d_state_out.middleCols(hd * dv, dv);
        Mat d_a = d_att * c.v.middleCols(hd * dv, dv).transpose();
        dv_all.middleCols(hd * dv, dv).noalias() = a.transpose() * d_att;
        Mat d_s = softmax_rows_backward(a, d_a) * inv;
        dq_all.middleCols(hd * dq, dq).noalias() = d_s * c.k.middleCols(hd * dq, dq);
        dk_all.middleCols(hd * dq, dq).noalias() = d_s.transpose() * c.q.middleCols(hd * dq, dq);
    }

    Mat d_joint = blk.query.backward(p, grads, c.joint, dq_all);
    d_joint += blk.key.backward(p, grads, c.joint, dk_all);

    Mat d_conv_feat = d_cond_out + blk.value.backward(p, grads, c.conv_feat, dv_all);
    Mat d_conv_pre = relu_backward(c.conv_pre, c.drop_out.apply(d_conv_feat));
    Mat d_conv_in = blk.conv.backward(p, grads, c.conv_in, d_conv_pre);

    Mat d_cond = d_cond_out + d_state_out + d_joint.leftCols(h) + c.drop_in.apply(d_conv_in);
    Mat d_state = d_state_out + d_joint.rightCols(h);
    return {std::move(d_cond), std::move(d_state)};
}

Decoder::Decoder(DecoderConfig cfg, ParameterSet& params, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    const int h = cfg_.hidden;
    Linear::create(params, "dec.state_in", h + cfg_.num_classes, h, rng);
    Linear::create(params, "dec.cond_in", h, h, rng);
    for (int l = 1; l <= cfg_.layers; ++l) {
        const int dil = 1 << l;
        DilatedConv::create(params, block_prefix(l) + ".conv", h, h, cfg_.kernel, dil, ((cfg_.kernel - 1) * dil) / 2,
                            rng);
        Linear::create(params, block_prefix(l) + ".query", 2 * h, cfg_.qk_dim(), rng, false);
        Linear::create(params, block_prefix(l) + ".key", 2 * h, cfg_.qk_dim(), rng, false);
        Linear::create(params, block_prefix(l) + ".value", h, h, rng, false);
    }
    Linear::create(params, "dec.out", h, cfg_.num_classes, rng);
    bind(params);
}

Decoder::Decoder(DecoderConfig cfg, const ParameterSet& params) : cfg_(cfg) {
    cfg_.validate();
    bind(params);
}

void Decoder::bind(const ParameterSet& params) {
    const int h = cfg_.hidden;
    auto linear = [&](const std::string& name, int in, int out, bool with_bias) {
        Linear l;
        l.weight = params.id(name + ".weight");
        l.bias = with_bias ? params.id(name + ".bias") : -1;
        if (params[l.weight].rows() != in || params[l.weight].cols() != out)
            throw std::invalid_argument("decoder parameter '" + name + "' has unexpected shape");
        return l;
    };
    state_in_ = linear("dec.state_in", h + cfg_.num_classes, h, true);
    cond_in_ = linear("dec.cond_in", h, h, true);
    blocks_.clear();
    for (int l = 1; l <= cfg_.layers; ++l) {
        const int dil = 1 << l;
        CrossAttentionParams b;
        b.conv.weight = params.id(block_prefix(l) + ".conv.weight");
        b.conv.bias = params.id(block_prefix(l) + ".conv.bias");
        b.conv.kernel = cfg_.kernel;
        b.conv.dilation = dil;
        b.conv.shift = ((cfg_.kernel - 1) * dil) / 2;
        b.conv.in = h;
        if (params[b.conv.weight].rows() != static_cast<Eigen::Index>(cfg_.kernel) * h)
            throw std::invalid_argument("decoder parameter '" + block_prefix(l) + ".conv' has unexpected shape");
        b.query = linear(block_prefix(l) + ".query", 2 * h, cfg_.qk_dim(), false);
        b.key = linear(block_prefix(l) + ".key", 2 * h, cfg_.qk_dim(), false);
        b.value = linear(block_prefix(l) + ".value", h, h, false);
        blocks_.push_back(b);
    }
    out_ = linear("dec.out", h, cfg_.num_classes, true);
}

Mat Decoder::forward(const ParameterSet& p, const Mat& noised_state, const Mat& condition, int step, Rng* rng,
                     DecoderCache* cache) const {
    const int h = cfg_.hidden;
    if (noised_state.cols() != cfg_.num_classes)
        throw std::invalid_argument("decoder: state has " + std::to_string(noised_state.cols()) + " classes, expected " +
                                    std::to_string(cfg_.num_classes));
    if (condition.cols() != h || condition.rows() != noised_state.rows())
        throw std::invalid_argument("decoder: condition shape does not match state");
    if (!noised_state.allFinite() || !condition.allFinite())
        throw std::invalid_argument("decoder: non-finite input");
    const Eigen::Index T = noised_state.rows();

    Mat state_input(T, h + cfg_.num_classes);
    state_input.leftCols(h).rowwise() = step_embed(step, h);
    state_input.rightCols(cfg_.num_classes) = noised_state;
    Mat hs = state_in_.forward(p, state_input);
    check_finite(hs, "state_in");
    Mat hc = cond_in_.forward(p, condition);
    check_finite(hc, "cond_in");

    if (cache) cache->blocks.assign(blocks_.size(), {});
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
        CrossAttentionOutput o = cross_attention_block(p, blocks_[l], cfg_.heads, cfg_.dropout, hc, hs, rng,
                                                       cache ? &cache->blocks[l] : nullptr);
        hc = std::move(o.cond);
        hs = std::move(o.state);
        check_finite(hs, block_prefix(static_cast<int>(l) + 1));
    }
    Mat act = relu(hs);
    Mat logits = out_.forward(p, act);
    check_finite(logits, "out");
    Mat probs = softmax_rows(logits);
    if (cache) {
        cache->state_input = std::move(state_input);
        cache->cond_input = condition;
        cache->final_pre = std::move(hs);
        cache->final_act = std::move(act);
        cache->probs = probs;
    }
    return probs;
}

Mat Decoder::backward(const ParameterSet& p, ParameterSet& grads, const DecoderCache& cache, const Mat& d_logits) const {
    Mat d_act = out_.backward(p, grads, cache.final_act, d_logits);
    Mat d_state = relu_backward(cache.final_pre, d_act);
    Mat d_cond = Mat::Zero(d_state.rows(), d_state.cols());
    for (std::size_t l = blocks_.size(); l-- > 0;) {
        auto [dc, ds] = cross_attention_block_backward(p, grads, blocks_[l], cfg_.heads, cache.blocks[l], d_cond, d_state);
        d_cond = std::move(dc);
        d_state = std::move(ds);
    }
    state_in_.backward(p, grads, cache.state_input, d_state);
    return cond_in_.backward(p, grads, cache.cond_input, d_cond);
}

}  // namespace polseg
