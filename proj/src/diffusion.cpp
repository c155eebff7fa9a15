#include "polseg/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace polseg {

std::string to_string(ScheduleKind k) { return k == ScheduleKind::Linear ? "linear" : "cosine"; }

ScheduleKind parse_schedule_kind(std::string_view s) {
    if (s == "linear") return ScheduleKind::Linear;
    if (s == "cosine") return ScheduleKind::Cosine;
    throw std::invalid_argument("unknown schedule kind '" + std::string(s) + "'");
}

NoiseSchedule::NoiseSchedule(std::vector<double> betas, ScheduleParams params)
    : betas_(std::move(betas)), params_(params) {
    if (betas_.size() < 2) throw std::invalid_argument("noise schedule needs at least 2 steps");
    alpha_bar_.resize(betas_.size() + 1);
    alpha_bar_[0] = 1.0;
    for (std::size_t i = 0; i < betas_.size(); ++i) {
        const double b = betas_[i];
        if (!(b > 0.0 && b < 1.0))
            throw std::invalid_argument("beta_" + std::to_string(i + 1) + " = " + std::to_string(b) +
                                        " outside (0,1)");
        alpha_bar_[i + 1] = alpha_bar_[i] * (1.0 - b);
    }
}

double NoiseSchedule::beta(int s) const {
    if (s < 1 || s > steps()) throw std::out_of_range("beta: step " + std::to_string(s) + " outside [1,S]");
    return betas_[static_cast<std::size_t>(s - 1)];
}

double NoiseSchedule::alpha_bar(int s) const {
    if (s < 0 || s > steps()) throw std::out_of_range("alpha_bar: step " + std::to_string(s) + " outside [0,S]");
    return alpha_bar_[static_cast<std::size_t>(s)];
}

NoiseSchedule make_schedule(int steps, const ScheduleParams& params) {
    if (steps < 2) throw std::invalid_argument("make_schedule: need S >= 2");
    std::vector<double> betas(static_cast<std::size_t>(steps));
    if (params.kind == ScheduleKind::Linear) {
        for (int i = 0; i < steps; ++i)
            betas[static_cast<std::size_t>(i)] =
                params.beta_start + (params.beta_end - params.beta_start) * static_cast<double>(i) / (steps - 1);
    } else {
        auto f = [&](double u) {
            const double a = (u + params.cosine_offset) / (1.0 + params.cosine_offset) * std::numbers::pi / 2.0;
            return std::cos(a) * std::cos(a);
        };
        for (int i = 0; i < steps; ++i) {
            const double b = 1.0 - f(static_cast<double>(i + 1) / steps) / f(static_cast<double>(i) / steps);
            betas[static_cast<std::size_t>(i)] = std::min(b, 0.999);
        }
    }
    return NoiseSchedule(std::move(betas), params);
}

std::vector<int> skip_steps(int total_steps, int infer_steps) {
    if (infer_steps < 1 || infer_steps > total_steps)
        throw std::invalid_argument("infer_steps must be in [1, S]");
    const int stride = total_steps / infer_steps;
    std::vector<int> out;
    for (int k = 0; k < infer_steps; ++k) out.push_back(total_steps - k * stride);
    out.push_back(0);
    return out;
}

Mat encode_labels(const std::vector<int>& labels, int num_classes, double scale) {
    return (2.0 * onehot(labels, num_classes).array() - 1.0) * scale;
}

std::vector<int> decode_labels(const Mat& probabilities) { return argmax_rows(probabilities); }

Mat forward_diffuse(const Mat& x0, int s, const NoiseSchedule& sched, const Mat& noise) {
    if (noise.rows() != x0.rows() || noise.cols() != x0.cols())
        throw std::invalid_argument("forward_diffuse: noise shape mismatch");
    const double ab = sched.alpha_bar(s);
    return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * noise;
}

Mat ddim_step(const Mat& state, int s_from, int s_to, const Mat& predicted_x0, const NoiseSchedule& sched, double eta,
              Rng* rng) {
    if (s_to >= s_from)
        throw std::invalid_argument("ddim_step: s_to (" + std::to_string(s_to) + ") must be below s_from (" +
                                    std::to_string(s_from) + ")");
    if (!predicted_x0.allFinite()) throw std::invalid_argument("ddim_step: non-finite prediction");
    const double ab_from = sched.alpha_bar(s_from);
    const double ab_to = sched.alpha_bar(s_to);
    double sigma = 0.0;
    if (eta > 0.0) sigma = eta * std::sqrt((1.0 - ab_to) / (1.0 - ab_from)) * std::sqrt(1.0 - ab_from / ab_to);
    const Mat eps_hat = (state - std::sqrt(ab_from) * predicted_x0) / std::sqrt(1.0 - ab_from);
    const double dir = std::sqrt(std::max(0.0, 1.0 - ab_to - sigma * sigma));
    Mat out = std::sqrt(ab_to) * predicted_x0 + dir * eps_hat;
    if (sigma > 0.0) {
        if (rng == nullptr) throw std::invalid_argument("ddim_step: eta > 0 needs an rng");
        out += sigma * rng->normal_matrix(out.rows(), out.cols());
    }
    return out;
}

std::string to_string(MaskKind k) {
    switch (k) {
        case MaskKind::None: return "none";
        case MaskKind::PositionPrior: return "position_prior";
        case MaskKind::BoundaryPrior: return "boundary_prior";
    }
    return "?";
}

Mat ConditionMask::apply(const Mat& embedding) const {
    if (mask.size() != embedding.rows()) throw std::invalid_argument("mask length does not match embedding");
    return mask.asDiagonal() * embedding;
}

ConditionMask make_mask(MaskKind kind, int length, const std::vector<int>* labels, int window) {
    ConditionMask m;
    m.kind = kind;
    switch (kind) {
        case MaskKind::None: m.mask = Vec::Ones(length); break;
        case MaskKind::PositionPrior: m.mask = Vec::Zero(length); break;
        case MaskKind::BoundaryPrior: {
            if (labels == nullptr) throw std::invalid_argument("boundary_prior mask requires ground-truth labels");
            if (static_cast<int>(labels->size()) != length)
                throw std::invalid_argument("boundary_prior mask: label length mismatch");
            if (window < 0) throw std::invalid_argument("boundary window must be >= 0");
            m.mask = Vec::Ones(length);
            for (int b = 1; b < length; ++b) {
                if ((*labels)[static_cast<std::size_t>(b)] == (*labels)[static_cast<std::size_t>(b - 1)]) continue;
                for (int t = std::max(0, b - window); t <= std::min(length - 1, b + window - 1); ++t) m.mask(t) = 0.0;
            }
            break;
        }
    }
    return m;
}

MaskKind sample_mask_kind(Rng& rng) {
    switch (rng.uniform_int(0, 2)) {
        case 0: return MaskKind::None;
        case 1: return MaskKind::PositionPrior;
        default: return MaskKind::BoundaryPrior;
    }
}

}  // namespace polseg
