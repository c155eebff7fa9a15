#pragma once

#include <vector>

#include "polseg/layers.hpp"
#include "polseg/params.hpp"

namespace polseg {

struct EncoderConfig {
    int d_in = 9;
    int hidden = 64;
    int layers = 9;
    int kernel = 12;
    double dropout = 0.1;
    int num_classes = 5;

    void validate() const;
    /// 1 + sum_{l=1..L} (K-1) * 2^l, the span covered by one conv per block.
    long receptive_field() const;
};

struct EncoderOutput {
    Mat embedding;   // T x hidden
    Mat aux_logits;  // T x C
};

/// Activations retained for the backward pass.
struct EncoderCache {
    Mat input;
    Mat projected;
    std::vector<Mat> block_in;
    std::vector<Mat> conv1_pre;
    std::vector<Mat> conv1_act;
    std::vector<Mat> conv2_out;
    std::vector<DropoutMask> drop;
    Mat concat;
    Mat embedding;
};

/// Dilated-convolution encoder: input FC, L residual blocks with dilation
/// 2^l (l = 1..L), channel concat of every block output, 1x1 fusion conv to
/// the embedding, and an FC auxiliary class head on the embedding.
class Encoder {
public:
    Encoder(EncoderConfig cfg, ParameterSet& params, Rng& rng);
    /// Rebinds to parameters created by an identically configured encoder.
    Encoder(EncoderConfig cfg, const ParameterSet& params);

    const EncoderConfig& config() const { return cfg_; }

    /// `rng` non-null enables dropout (training mode).
    EncoderOutput forward(const ParameterSet& p, const Mat& x, Rng* rng = nullptr, EncoderCache* cache = nullptr) const;
    /// Accumulates parameter gradients; either upstream gradient may be empty.
    void backward(const ParameterSet& p, ParameterSet& grads, const EncoderCache& cache, const Mat& d_embedding,
                  const Mat& d_aux_logits) const;

private:
    void bind(const ParameterSet& params);

    EncoderConfig cfg_;
    Linear input_;
    std::vector<DilatedConv> conv1_;
    std::vector<DilatedConv> conv2_;
    Linear fuse_;
    Linear aux_;
};

}  // namespace polseg
