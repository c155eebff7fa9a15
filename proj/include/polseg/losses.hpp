#pragma once

#include <vector>

#include "polseg/tensor.hpp"

namespace polseg {

inline constexpr double kLogFloor = 1e-12;

/// Loss value with its gradient w.r.t. the probability matrix it was
/// evaluated on. The gradient is left empty when not requested.
struct LossValue {
    double value = 0.0;
    Mat grad;
};

/// -(1/(T*C)) sum_t sum_c Y_tc log p_tc, log floored at 1e-12.
LossValue ce_loss(const Mat& p, const std::vector<int>& labels, bool with_grad = false);

/// (1/((T-1)*C)) sum min((log p_t,c - log p_t+1,c)^2, clamp). Requires T >= 2.
LossValue smooth_loss(const Mat& p, double clamp = 16.0, bool with_grad = false);

/// Transition indicator (1 at t when label(t) != label(t+1)) convolved with a
/// Gaussian of std `sigma` truncated at 4 sigma, peak-normalized and clamped
/// to [0, 1]. Length T; the last entry is always 0.
std::vector<double> boundary_target(const std::vector<int>& labels, double sigma = 2.0);

/// (1/(T-1)) sum_t [-B_t log(1 - p_t.p_t+1) - (1 - B_t) log(p_t.p_t+1)].
LossValue boundary_loss(const Mat& p, const std::vector<double>& target, bool with_grad = false);

struct LossWeights {
    double ce = 1.0;
    double smooth = 0.15;
    double boundary = 1.0;
    double aux = 1.0;
    double smooth_clamp = 16.0;
    double boundary_sigma = 2.0;

    void validate() const;
};

struct TotalLoss {
    double total = 0.0;
    double ce = 0.0;
    double smooth = 0.0;
    double boundary = 0.0;
    double aux = 0.0;
    Mat grad_dec;  // dL/dp_dec
    Mat grad_aux;  // dL/dp_aux
};

/// w_ce*CE(p_dec) + w_smo*SMO(p_dec) + w_bd*BD(p_dec) + w_aux*CE(p_aux).
/// Either probability matrix may be empty, in which case its terms are skipped.
TotalLoss total_loss(const Mat& p_dec, const Mat& p_aux, const std::vector<int>& labels,
                     const std::vector<double>& boundary, const LossWeights& w, bool with_grad = false);

}  // namespace polseg
