#include <cmath>

#include "doctest.h"
#include "polseg/domain.hpp"
#include "polseg/losses.hpp"

using namespace polseg;

namespace {

Mat random_probs(Rng& rng, int T, int C) { return softmax_rows(rng.normal_matrix(T, C)); }

double ce_loop(const Mat& p, const std::vector<int>& y) {
    double s = 0;
    for (int t = 0; t < p.rows(); ++t)
        for (int c = 0; c < p.cols(); ++c)
            if (y[static_cast<std::size_t>(t)] == c) s -= std::log(std::max(p(t, c), 1e-12));
    return s / static_cast<double>(p.rows() * p.cols());
}

double smooth_loop(const Mat& p, double clamp) {
    double s = 0;
    for (int t = 0; t + 1 < p.rows(); ++t)
        for (int c = 0; c < p.cols(); ++c) {
            const double d = std::log(std::max(p(t, c), 1e-12)) - std::log(std::max(p(t + 1, c), 1e-12));
            s += std::min(d * d, clamp);
        }
    return s / static_cast<double>((p.rows() - 1) * p.cols());
}

double boundary_loop(const Mat& p, const std::vector<double>& b) {
    double s = 0;
    for (int t = 0; t + 1 < p.rows(); ++t) {
        double dot = 0;
        for (int c = 0; c < p.cols(); ++c) dot += p(t, c) * p(t + 1, c);
        const double bt = b[static_cast<std::size_t>(t)];
        s += -bt * std::log(std::max(1 - dot, 1e-12)) - (1 - bt) * std::log(std::max(dot, 1e-12));
    }
    return s / static_cast<double>(p.rows() - 1);
}

// Gradient w.r.t. logits through the softmax, checked by central differences.
template <typename F>
double logit_grad_error(const Mat& logits, F loss_and_grad) {
    const Mat p = softmax_rows(logits);
    const Mat analytic = softmax_rows_backward(p, loss_and_grad(p, true).grad);
    double worst = 0;
    const double h = 1e-6;
    for (int i = 0; i < logits.rows(); ++i)
        for (int j = 0; j < logits.cols(); ++j) {
            Mat up = logits, down = logits;
            up(i, j) += h;
            down(i, j) -= h;
            const double num =
                (loss_and_grad(softmax_rows(up), false).value - loss_and_grad(softmax_rows(down), false).value) / (2 * h);
            worst = std::max(worst, std::abs(num - analytic(i, j)) / std::max({std::abs(num), std::abs(analytic(i, j)), 1e-4}));
        }
    return worst;
}

}  // namespace

TEST_CASE("cross-entropy") {
    Rng rng(1);
    const std::vector<int> y{0, 2, 1, 1, 3, 0};
    CHECK(ce_loss(onehot(y, 4), y).value < 1e-10);
    CHECK(ce_loss(Mat::Constant(6, 4, 0.25), y).value == doctest::Approx(std::log(4.0) / 4.0).epsilon(1e-12));
    for (int k = 0; k < 10; ++k) {
        const Mat p = random_probs(rng, 6, 4);
        CHECK(std::abs(ce_loss(p, y).value - ce_loop(p, y)) < 1e-10);
    }
    CHECK(logit_grad_error(rng.normal_matrix(8, 4), [&](const Mat& p, bool g) {
              return ce_loss(p, {0, 1, 2, 3, 3, 2, 1, 0}, g);
          }) < 1e-4);
}

TEST_CASE("smoothing loss") {
    Rng rng(2);
    Mat constant(5, 3);
    constant.rowwise() = RowVec::Constant(3, 1.0 / 3.0);
    CHECK(smooth_loss(constant).value == 0.0);
    CHECK(smooth_loss(Mat::Ones(2, 1)).value == 0.0);
    CHECK_THROWS(smooth_loss(Mat::Ones(1, 3)));
    for (int k = 0; k < 10; ++k) {
        const Mat p = random_probs(rng, 7, 4);
        CHECK(std::abs(smooth_loss(p).value - smooth_loop(p, 16.0)) < 1e-10);
    }
    // Relabeling classes leaves the loss unchanged.
    const Mat p = random_probs(rng, 7, 4);
    Mat perm(7, 4);
    perm << p.col(2), p.col(0), p.col(3), p.col(1);
    CHECK(std::abs(smooth_loss(p).value - smooth_loss(perm).value) < 1e-12);
    CHECK(logit_grad_error(rng.normal_matrix(8, 4), [](const Mat& q, bool g) { return smooth_loss(q, 16.0, g); }) < 1e-4);
}

TEST_CASE("boundary target") {
    CHECK(boundary_target({1, 1, 1, 1}) == std::vector<double>(4, 0.0));
    const std::vector<int> y{0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1};
    const std::vector<double> delta = boundary_target(y, 0.0);
    CHECK(delta[4] == 1.0);
    CHECK(std::count(delta.begin(), delta.end(), 0.0) == 11);
    const std::vector<double> b = boundary_target(y, 2.0);
    CHECK(b[4] == doctest::Approx(1.0));
    CHECK(std::abs(b[3] - std::exp(-0.125)) < 1e-12);
    CHECK(std::abs(b[5] - std::exp(-0.125)) < 1e-12);
    CHECK(b.back() == 0.0);
    for (double v : b) CHECK((v >= 0.0 && v <= 1.0));
}

TEST_CASE("boundary loss") {
    Rng rng(3);
    CHECK(boundary_loss(onehot({1, 1}, 3), {0.0, 0.0}).value < 1e-10);
    CHECK(boundary_loss(onehot({0, 1}, 3), {1.0, 0.0}).value < 1e-10);
    const std::vector<int> y{0, 0, 1, 1, 1, 2, 2, 3};
    const std::vector<double> b = boundary_target(y, 2.0);
    for (int k = 0; k < 10; ++k) {
        const Mat p = random_probs(rng, 8, 4);
        CHECK(std::abs(boundary_loss(p, b).value - boundary_loop(p, b)) < 1e-10);
    }
    // Each pair term is symmetric in its two frames.
    const Mat p = random_probs(rng, 2, 4);
    Mat swapped(2, 4);
    swapped << p.row(1), p.row(0);
    CHECK(std::abs(boundary_loss(p, {0.3, 0.0}).value - boundary_loss(swapped, {0.3, 0.0}).value) < 1e-12);
    CHECK(logit_grad_error(rng.normal_matrix(8, 4), [&](const Mat& q, bool g) { return boundary_loss(q, b, g); }) < 1e-4);
}

TEST_CASE("total loss composition") {
    Rng rng(4);
    const std::vector<int> y{0, 0, 1, 1, 2, 2, 2, 3};
    const std::vector<double> b = boundary_target(y, 2.0);
    const Mat pd = random_probs(rng, 8, 4), pa = random_probs(rng, 8, 4);
    LossWeights w;
    const TotalLoss t = total_loss(pd, pa, y, b, w);
    const double sum = ce_loss(pd, y).value + 0.15 * smooth_loss(pd).value + boundary_loss(pd, b).value + ce_loss(pa, y).value;
    CHECK(std::abs(t.total - sum) < 1e-12);
    LossWeights zero{0, 0, 0, 0};
    CHECK(total_loss(pd, pa, y, b, zero).total == 0.0);
    // A transition between one-hot rows always pays the clamped smoothing term,
    // so the zero case needs a single segment.
    const std::vector<int> flat(8, 2);
    CHECK(total_loss(onehot(flat, 4), onehot(flat, 4), flat, boundary_target(flat), w).total < 1e-9);
    CHECK(total_loss(onehot(y, 4), onehot(y, 4), y, boundary_target(y, 0.0), w).smooth ==
          doctest::Approx(3 * 2 * 16.0 / (7 * 4)));
    LossWeights neg;
    neg.boundary = -1;
    CHECK_THROWS(neg.validate());
}
