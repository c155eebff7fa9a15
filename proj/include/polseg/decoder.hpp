#pragma once

#include <vector>

#include "polseg/layers.hpp"
#include "polseg/params.hpp"

namespace polseg {

struct DecoderConfig {
    int hidden = 64;
    int layers = 3;
    double dropout = 0.1;
    int num_classes = 5;
    int kernel = 3;          // in-block dilated conv; dilation 2^l for block l = 1..L
    int heads = 1;
    int key_dim = 0;         // total query/key width; 0 means `hidden`

    void validate() const;
    int qk_dim() const { return key_dim > 0 ? key_dim : hidden; }
};

/// Sinusoidal encoding of a diffusion step: entry 2i is
/// sin(s / 10000^(2i/dim)), entry 2i+1 the matching cosine. `dim` must be even.
RowVec step_embed(int step, int dim);

/// Parameter handles of one cross-attention block.
struct CrossAttentionParams {
    DilatedConv conv;  // conditional path
    Linear query;      // (h_c ⊕ h_s) -> qk
    Linear key;        // (h_c ⊕ h_s) -> qk
    Linear value;      // Conv(h_c) -> hidden
};

struct CrossAttentionCache {
    Mat cond_in;
    Mat state_in;
    DropoutMask drop_in;
    Mat conv_in;    // dropout(cond_in)
    Mat conv_pre;   // conv(conv_in)
    DropoutMask drop_out;
    Mat conv_feat;  // dropout(relu(conv_pre)), the block's Conv(h_c)
    Mat joint;      // [cond_in, state_in]
    Mat q, k, v;
    std::vector<Mat> attn;  // per head, T x T, row-stochastic
};

struct CrossAttentionOutput {
    Mat cond;   // h_c + Conv(h_c)
    Mat state;  // h_s + h_c + softmax(QK^T / sqrt(d_k)) V
};

/// One block. `rng` non-null enables dropout.
CrossAttentionOutput cross_attention_block(const ParameterSet& p, const CrossAttentionParams& blk, int heads,
                                           double dropout, const Mat& cond, const Mat& state, Rng* rng = nullptr,
                                           CrossAttentionCache* cache = nullptr);

/// Returns (d_cond, d_state).
std::pair<Mat, Mat> cross_attention_block_backward(const ParameterSet& p, ParameterSet& grads,
                                                   const CrossAttentionParams& blk, int heads,
                                                   const CrossAttentionCache& cache, const Mat& d_cond_out,
                                                   const Mat& d_state_out);

struct DecoderCache {
    Mat state_input;  // [step_embed, Y_s]
    Mat cond_input;   // masked encoder embedding
    std::vector<CrossAttentionCache> blocks;
    Mat final_pre;    // h_s after the last block
    Mat final_act;
    Mat probs;
};

/// Denoiser f(Y_s, x_enc, s) -> T x C probabilities.
class Decoder {
public:
    Decoder(DecoderConfig cfg, ParameterSet& params, Rng& rng);
    Decoder(DecoderConfig cfg, const ParameterSet& params);

    const DecoderConfig& config() const { return cfg_; }
    const CrossAttentionParams& block(int l) const { return blocks_[static_cast<std::size_t>(l)]; }

    Mat forward(const ParameterSet& p, const Mat& noised_state, const Mat& condition, int step, Rng* rng = nullptr,
                DecoderCache* cache = nullptr) const;
    /// Takes dL/dlogits; returns dL/dcondition.
    Mat backward(const ParameterSet& p, ParameterSet& grads, const DecoderCache& cache, const Mat& d_logits) const;

private:
    void bind(const ParameterSet& params);

    DecoderConfig cfg_;
    Linear state_in_;
    Linear cond_in_;
    std::vector<CrossAttentionParams> blocks_;
    Linear out_;
};

}  // namespace polseg
