#include "polseg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace polseg {

namespace {

double safe_log(double x) { return std::log(std::max(x, kLogFloor)); }
// d/dx of safe_log; zero where the floor is active.
double safe_log_grad(double x) { return x > kLogFloor ? 1.0 / x : 0.0; }

}  // namespace

LossValue ce_loss(const Mat& p, const std::vector<int>& labels, bool with_grad) {
    const Eigen::Index T = p.rows();
    const Eigen::Index C = p.cols();
    if (static_cast<Eigen::Index>(labels.size()) != T) throw std::invalid_argument("ce_loss: length mismatch");
    LossValue out;
    if (with_grad) out.grad = Mat::Zero(T, C);
    const double norm = 1.0 / static_cast<double>(T * C);
    double sum = 0.0;
    for (Eigen::Index t = 0; t < T; ++t) {
        const int c = labels[static_cast<std::size_t>(t)];
        if (c < 0 || c >= C) throw std::out_of_range("ce_loss: label outside class range");
        sum -= safe_log(p(t, c));
        if (with_grad) out.grad(t, c) = -norm * safe_log_grad(p(t, c));
    }
    out.value = sum * norm;
    return out;
}

LossValue smooth_loss(const Mat& p, double clamp, bool with_grad) {
    const Eigen::Index T = p.rows();
    const Eigen::Index C = p.cols();
    if (T < 2) throw std::invalid_argument("smooth_loss: need T >= 2");
    LossValue out;
    if (with_grad) out.grad = Mat::Zero(T, C);
    const double norm = 1.0 / static_cast<double>((T - 1) * C);
    double sum = 0.0;
    for (Eigen::Index t = 0; t + 1 < T; ++t) {
        for (Eigen::Index c = 0; c < C; ++c) {
            const double diff = safe_log(p(t, c)) - safe_log(p(t + 1, c));
            const double sq = diff * diff;
            if (sq >= clamp) {
                sum += clamp;
                continue;
            }
            sum += sq;
            if (with_grad) {
                out.grad(t, c) += norm * 2.0 * diff * safe_log_grad(p(t, c));
                out.grad(t + 1, c) -= norm * 2.0 * diff * safe_log_grad(p(t + 1, c));
            }
        }
    }
    out.value = sum * norm;
    return out;
}

std::vector<double> boundary_target(const std::vector<int>& labels, double sigma) {
    const int T = static_cast<int>(labels.size());
    std::vector<double> indicator(static_cast<std::size_t>(T), 0.0);
    for (int t = 0; t + 1 < T; ++t)
        if (labels[static_cast<std::size_t>(t)] != labels[static_cast<std::size_t>(t + 1)])
            indicator[static_cast<std::size_t>(t)] = 1.0;
    if (sigma <= 0.0) return indicator;

    // Normalized kernel scaled so its centre tap is 1: an isolated transition peaks at exactly 1.
    const int radius = static_cast<int>(std::ceil(4.0 * sigma));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    for (int k = -radius; k <= radius; ++k)
        kernel[static_cast<std::size_t>(k + radius)] = std::exp(-0.5 * k * k / (sigma * sigma));

    std::vector<double> out(static_cast<std::size_t>(T), 0.0);
    for (int t = 0; t < T; ++t) {
        if (indicator[static_cast<std::size_t>(t)] == 0.0) continue;
        for (int k = -radius; k <= radius; ++k) {
            const int u = t + k;
            if (u < 0 || u >= T) continue;
            out[static_cast<std::size_t>(u)] += kernel[static_cast<std::size_t>(k + radius)];
        }
    }
    for (auto& v : out) v = std::clamp(v, 0.0, 1.0);
    if (T > 0) out.back() = 0.0;  // no pair (T-1, T)
    return out;
}

LossValue boundary_loss(const Mat& p, const std::vector<double>& target, bool with_grad) {
    const Eigen::Index T = p.rows();
    if (T < 2) throw std::invalid_argument("boundary_loss: need T >= 2");
    if (static_cast<Eigen::Index>(target.size()) < T - 1) throw std::invalid_argument("boundary_loss: target too short");
    LossValue out;
    if (with_grad) out.grad = Mat::Zero(T, p.cols());
    const double norm = 1.0 / static_cast<double>(T - 1);
    double sum = 0.0;
    for (Eigen::Index t = 0; t + 1 < T; ++t) {
        const double b = target[static_cast<std::size_t>(t)];
        const double q = p.row(t).dot(p.row(t + 1));
        sum += -b * safe_log(1.0 - q) - (1.0 - b) * safe_log(q);
        if (with_grad) {
            const double dq = norm * (b * safe_log_grad(1.0 - q) - (1.0 - b) * safe_log_grad(q));
            out.grad.row(t) += dq * p.row(t + 1);
            out.grad.row(t + 1) += dq * p.row(t);
        }
    }
    out.value = sum * norm;
    return out;
}

void LossWeights::validate() const {
    if (ce < 0 || smooth < 0 || boundary < 0 || aux < 0) throw std::invalid_argument("loss weights must be >= 0");
    if (smooth_clamp <= 0) throw std::invalid_argument("smooth clamp must be positive");
}

TotalLoss total_loss(const Mat& p_dec, const Mat& p_aux, const std::vector<int>& labels,
                     const std::vector<double>& boundary, const LossWeights& w, bool with_grad) {
    w.validate();
    TotalLoss out;
    if (p_dec.size()) {
        if (with_grad) out.grad_dec = Mat::Zero(p_dec.rows(), p_dec.cols());
        if (w.ce > 0) {
            LossValue l = ce_loss(p_dec, labels, with_grad);
            out.ce = l.value;
            if (with_grad) out.grad_dec += w.ce * l.grad;
        }
        if (w.smooth > 0 && p_dec.rows() >= 2) {
            LossValue l = smooth_loss(p_dec, w.smooth_clamp, with_grad);
            out.smooth = l.value;
            if (with_grad) out.grad_dec += w.smooth * l.grad;
        }
        if (w.boundary > 0 && p_dec.rows() >= 2) {
            LossValue l = boundary_loss(p_dec, boundary, with_grad);
            out.boundary = l.value;
            if (with_grad) out.grad_dec += w.boundary * l.grad;
        }
    }
    if (p_aux.size() && w.aux > 0) {
        LossValue l = ce_loss(p_aux, labels, with_grad);
        out.aux = l.value;
        if (with_grad) out.grad_aux = w.aux * l.grad;
    }
    out.total = w.ce * out.ce + w.smooth * out.smooth + w.boundary * out.boundary + w.aux * out.aux;
    return out;
}

}  // namespace polseg
