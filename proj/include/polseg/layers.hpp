#pragma once

#include <string>
#include <vector>

#include "polseg/params.hpp"
#include "polseg/tensor.hpp"

namespace polseg {

/// Dilated temporal convolution without bias:
///   y(t) = sum_{i<K} x(t - i*dilation + shift) * taps[i]
/// with zero padding outside [0, T). shift = 0 is the causal form; the
/// encoder uses shift = (K-1)*dilation/2 for same-length centred padding.
Mat dilated_conv(const Mat& x, const std::vector<Mat>& taps, int dilation, int shift = 0);

/// Per-timestep affine map, x (T x in) -> T x out.
struct Linear {
    int weight = -1;
    int bias = -1;

    static Linear create(ParameterSet& params, const std::string& name, int in, int out, Rng& rng,
                         bool with_bias = true);
    Mat forward(const ParameterSet& p, const Mat& x) const;
    /// Accumulates into `grads`; returns dL/dx.
    Mat backward(const ParameterSet& p, ParameterSet& grads, const Mat& x, const Mat& dy) const;
};

/// Dilated convolution with bias. The K taps are stacked row-wise in one
/// (K*in) x out weight matrix.
struct DilatedConv {
    int weight = -1;
    int bias = -1;
    int kernel = 1;
    int dilation = 1;
    int shift = 0;
    int in = 0;

    static DilatedConv create(ParameterSet& params, const std::string& name, int in, int out, int kernel,
                              int dilation, int shift, Rng& rng);
    Mat forward(const ParameterSet& p, const Mat& x) const;
    Mat backward(const ParameterSet& p, ParameterSet& grads, const Mat& x, const Mat& dy) const;
};

/// Inverted dropout. An empty mask means identity (evaluation mode).
struct DropoutMask {
    Mat scale;

    static DropoutMask sample(Eigen::Index rows, Eigen::Index cols, double rate, Rng* rng);
    Mat apply(const Mat& x) const;
};

Mat relu(const Mat& x);
Mat relu_backward(const Mat& pre, const Mat& dy);

}  // namespace polseg
