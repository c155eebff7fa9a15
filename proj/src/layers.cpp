#include "polseg/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace polseg {

namespace {

// Rows t in [lo, hi) read x(t + offset) with 0 <= t + offset < T.
struct ValidRange {
    Eigen::Index lo = 0;
    Eigen::Index hi = 0;
};

ValidRange valid_rows(Eigen::Index T, Eigen::Index offset) {
    ValidRange r;
    r.lo = std::max<Eigen::Index>(0, -offset);
    r.hi = std::min<Eigen::Index>(T, T - offset);
    if (r.hi < r.lo) r.hi = r.lo;
    return r;
}

Mat uniform_init(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = (2.0 * rng.uniform() - 1.0) * bound;
    return m;
}

}  // namespace

Mat dilated_conv(const Mat& x, const std::vector<Mat>& taps, int dilation, int shift) {
    if (dilation < 1) throw std::invalid_argument("dilated_conv: dilation must be >= 1");
    if (taps.empty()) throw std::invalid_argument("dilated_conv: no taps");
    const Eigen::Index T = x.rows();
    Mat y = Mat::Zero(T, taps.front().cols());
    for (std::size_t i = 0; i < taps.size(); ++i) {
        if (taps[i].rows() != x.cols()) throw std::invalid_argument("dilated_conv: tap shape mismatch");
        const Eigen::Index offset = shift - static_cast<Eigen::Index>(i) * dilation;
        const ValidRange r = valid_rows(T, offset);
        if (r.hi > r.lo) y.middleRows(r.lo, r.hi - r.lo).noalias() += x.middleRows(r.lo + offset, r.hi - r.lo) * taps[i];
    }
    return y;
}

Linear Linear::create(ParameterSet& params, const std::string& name, int in, int out, Rng& rng, bool with_bias) {
    Linear l;
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    l.weight = params.add(name + ".weight", uniform_init(in, out, bound, rng));
    if (with_bias) l.bias = params.add(name + ".bias", Mat::Zero(1, out));
    return l;
}

Mat Linear::forward(const ParameterSet& p, const Mat& x) const {
    Mat y = x * p[weight];
    if (bias >= 0) y.rowwise() += p[bias].row(0);
    return y;
}

Mat Linear::backward(const ParameterSet& p, ParameterSet& grads, const Mat& x, const Mat& dy) const {
    grads[weight].noalias() += x.transpose() * dy;
    if (bias >= 0) grads[bias] += dy.colwise().sum();
    return dy * p[weight].transpose();
}

DilatedConv DilatedConv::create(ParameterSet& params, const std::string& name, int in, int out, int kernel,
                                int dilation, int shift, Rng& rng) {
    if (kernel < 1 || dilation < 1) throw std::invalid_argument("conv kernel and dilation must be >= 1");
    DilatedConv c;
    c.kernel = kernel;
    c.dilation = dilation;
    c.shift = shift;
    c.in = in;
    const double bound = 1.0 / std::sqrt(static_cast<double>(in * kernel));
    c.weight = params.add(name + ".weight", uniform_init(static_cast<Eigen::Index>(kernel) * in, out, bound, rng));
    c.bias = params.add(name + ".bias", Mat::Zero(1, out));
    return c;
}

Mat DilatedConv::forward(const ParameterSet& p, const Mat& x) const {
    const Mat& w = p[weight];
    const Eigen::Index T = x.rows();
    Mat y(T, w.cols());
    y.rowwise() = p[bias].row(0);
    for (int i = 0; i < kernel; ++i) {
        const Eigen::Index offset = shift - static_cast<Eigen::Index>(i) * dilation;
        const ValidRange r = valid_rows(T, offset);
        if (r.hi > r.lo)
            y.middleRows(r.lo, r.hi - r.lo).noalias() +=
                x.middleRows(r.lo + offset, r.hi - r.lo) * w.middleRows(static_cast<Eigen::Index>(i) * in, in);
    }
    return y;
}

Mat DilatedConv::backward(const ParameterSet& p, ParameterSet& grads, const Mat& x, const Mat& dy) const {
    const Mat& w = p[weight];
    Mat& gw = grads[weight];
    const Eigen::Index T = x.rows();
    Mat dx = Mat::Zero(T, in);
    grads[bias] += dy.colwise().sum();
    for (int i = 0; i < kernel; ++i) {
        const Eigen::Index offset = shift - static_cast<Eigen::Index>(i) * dilation;
        const ValidRange r = valid_rows(T, offset);
        if (r.hi <= r.lo) continue;
        const Eigen::Index n = r.hi - r.lo;
        gw.middleRows(static_cast<Eigen::Index>(i) * in, in).noalias() +=
            x.middleRows(r.lo + offset, n).transpose() * dy.middleRows(r.lo, n);
        dx.middleRows(r.lo + offset, n).noalias() +=
            dy.middleRows(r.lo, n) * w.middleRows(static_cast<Eigen::Index>(i) * in, in).transpose();
    }
    return dx;
}

DropoutMask DropoutMask::sample(Eigen::Index rows, Eigen::Index cols, double rate, Rng* rng) {
    DropoutMask m;
    if (rng == nullptr || rate <= 0.0) return m;
    if (rate >= 1.0) throw std::invalid_argument("dropout rate must be < 1");
    m.scale.resize(rows, cols);
    const double keep = 1.0 / (1.0 - rate);
    for (Eigen::Index i = 0; i < m.scale.size(); ++i) m.scale.data()[i] = rng->uniform() < rate ? 0.0 : keep;
    return m;
}

Mat DropoutMask::apply(const Mat& x) const {
    if (scale.size() == 0) return x;
    return x.cwiseProduct(scale);
}

Mat relu(const Mat& x) { return x.cwiseMax(0.0); }

Mat relu_backward(const Mat& pre, const Mat& dy) {
    return (pre.array() > 0.0).select(dy, 0.0);
}

}  // namespace polseg
