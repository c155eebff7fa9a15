#include <cmath>

#include "doctest.h"
#include "polseg/diffusion.hpp"

using namespace polseg;

TEST_CASE("linear schedule") {
    const NoiseSchedule s = make_schedule(1000);
    CHECK(s.alpha_bar(0) == 1.0);
    CHECK(s.beta(1) == doctest::Approx(1e-4));
    CHECK(s.beta(1000) == doctest::Approx(0.02));
    double prod = 1.0;
    for (int k = 1; k <= 1000; ++k) {
        prod *= 1.0 - s.beta(k);
        if (k > 1) CHECK(s.alpha_bar(k) < s.alpha_bar(k - 1));
    }
    CHECK(std::abs(s.alpha_bar(1000) - prod) < 1e-15);
    CHECK(s.alpha_bar(1000) < 1e-4);
    CHECK_THROWS(make_schedule(1));
    CHECK_THROWS(NoiseSchedule({0.5, 1.0}, {}));
}

TEST_CASE("skipped steps") {
    const std::vector<int> v = skip_steps(1000, 25);
    CHECK(v.size() == 26);
    CHECK(v.front() == 1000);
    CHECK(v[1] == 960);
    CHECK(v[24] == 40);
    CHECK(v.back() == 0);
    CHECK(skip_steps(10, 10) == std::vector<int>{10, 9, 8, 7, 6, 5, 4, 3, 2, 1, 0});
}

TEST_CASE("label embedding") {
    const Mat x = encode_labels({0, 2}, 3, 1.0);
    CHECK(x(0, 0) == 1.0);
    CHECK(x(0, 1) == -1.0);
    CHECK(x(1, 2) == 1.0);
    CHECK(decode_labels(x) == std::vector<int>{0, 2});
    CHECK(decode_labels(Mat::Zero(1, 3)) == std::vector<int>{0});
}

TEST_CASE("forward process moments") {
    const NoiseSchedule sched = make_schedule(1000);
    const int n = 100000;
    Rng rng(99);
    for (int s : {10, 500, 990}) {
        const Mat x0 = Mat::Constant(1, 1, 1.0);
        double sum = 0, sq = 0;
        for (int i = 0; i < n; ++i) {
            const double v = forward_diffuse(x0, s, sched, rng.normal_matrix(1, 1))(0, 0);
            sum += v;
            sq += v * v;
        }
        const double mean = sum / n;
        const double var = sq / n - mean * mean;
        const double target_var = 1.0 - sched.alpha_bar(s);
        CHECK(std::abs(mean - std::sqrt(sched.alpha_bar(s))) < 3.0 * std::sqrt(target_var / n));
        CHECK(std::abs(var - target_var) < 3.0 * target_var * std::sqrt(2.0 / (n - 1)));
    }
}

TEST_CASE("deterministic sampling recovers the clean state with an exact predictor") {
    const NoiseSchedule sched = make_schedule(1000);
    const Mat x0 = encode_labels({0, 1, 1, 2, 2, 2, 0}, 3, 1.0);
    for (int n : {1, 7, 25, 100, 1000}) {
        Rng rng(static_cast<std::uint64_t>(n));
        Mat y = rng.normal_matrix(x0.rows(), x0.cols());
        const std::vector<int> steps = skip_steps(1000, n);
        for (std::size_t i = 0; i + 1 < steps.size(); ++i) y = ddim_step(y, steps[i], steps[i + 1], x0, sched);
        CHECK((y - x0).cwiseAbs().maxCoeff() < 1e-5);
    }
    Mat y = Mat::Zero(2, 2);
    CHECK_THROWS(ddim_step(y, 10, 10, y, sched));
}

TEST_CASE("condition masks") {
    const std::vector<int> y{0, 0, 1, 1};
    const ConditionMask b = make_mask(MaskKind::BoundaryPrior, 4, &y, 1);
    CHECK(b.mask(0) == 1.0);
    CHECK(b.mask(1) == 0.0);
    CHECK(b.mask(2) == 0.0);
    CHECK(b.mask(3) == 1.0);
    CHECK(make_mask(MaskKind::PositionPrior, 5, nullptr, 2).mask.isZero());
    CHECK(make_mask(MaskKind::None, 5, nullptr, 2).mask.isOnes());
    CHECK_THROWS(make_mask(MaskKind::BoundaryPrior, 4, nullptr, 2));

    Rng rng(8);
    int counts[3] = {0, 0, 0};
    for (int i = 0; i < 30000; ++i) ++counts[static_cast<int>(sample_mask_kind(rng))];
    for (int c : counts) CHECK(std::abs(c / 30000.0 - 1.0 / 3.0) < 0.02);
}
