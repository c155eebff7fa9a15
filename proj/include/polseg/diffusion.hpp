#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "polseg/domain.hpp"
#include "polseg/tensor.hpp"

namespace polseg {

enum class ScheduleKind { Linear, Cosine };

std::string to_string(ScheduleKind k);
ScheduleKind parse_schedule_kind(std::string_view s);

struct ScheduleParams {
    ScheduleKind kind = ScheduleKind::Linear;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    double cosine_offset = 0.008;
};

/// Variance schedule over steps 1..S. Index 0 of alpha_bar is the clean
/// state (alpha_bar(0) = 1).
class NoiseSchedule {
public:
    NoiseSchedule(std::vector<double> betas, ScheduleParams params);

    int steps() const { return static_cast<int>(betas_.size()); }
    double beta(int s) const;
    double alpha(int s) const { return 1.0 - beta(s); }
    double alpha_bar(int s) const;
    const ScheduleParams& params() const { return params_; }

private:
    std::vector<double> betas_;      // betas_[s-1] = beta_s
    std::vector<double> alpha_bar_;  // alpha_bar_[s], s = 0..S
    ScheduleParams params_;
};

NoiseSchedule make_schedule(int steps, const ScheduleParams& params = {});

/// Step indices visited by skipped-step sampling: S, S-stride, ..., then 0.
std::vector<int> skip_steps(int total_steps, int infer_steps);

/// x0 = scale * (2 * onehot - 1).
Mat encode_labels(const std::vector<int>& labels, int num_classes, double scale = 1.0);
/// Per-timestep argmax; lowest index wins ties.
std::vector<int> decode_labels(const Mat& probabilities);

/// x_s = sqrt(abar_s) x0 + sqrt(1 - abar_s) eps.
Mat forward_diffuse(const Mat& x0, int s, const NoiseSchedule& sched, const Mat& noise);

/// One deterministic (eta = 0) or stochastic skipped reverse step from
/// s_from to s_to < s_from given the predicted clean state.
Mat ddim_step(const Mat& state, int s_from, int s_to, const Mat& predicted_x0, const NoiseSchedule& sched,
              double eta = 0.0, Rng* rng = nullptr);

enum class MaskKind { None, PositionPrior, BoundaryPrior };

std::string to_string(MaskKind k);

struct ConditionMask {
    MaskKind kind = MaskKind::None;
    Vec mask;  // length T, entries in {0, 1}

    /// Row-wise product with a T x h embedding.
    Mat apply(const Mat& embedding) const;
};

/// `labels` is required for the boundary prior. Zeros cover
/// [b - window, b + window - 1] around each transition b (first index of the
/// new segment), clipped to [0, T).
ConditionMask make_mask(MaskKind kind, int length, const std::vector<int>* labels, int window);

/// Uniform over the three kinds.
MaskKind sample_mask_kind(Rng& rng);

}  // namespace polseg
