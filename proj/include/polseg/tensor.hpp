#pragma once

#include <cstdint>
#include <random>
#include <string>

#include <Eigen/Dense>

namespace polseg {

/// Time-major matrix: one row per timestep, one column per channel.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;

/// Seeded generator shared by every stochastic component. Sequences are
/// reproducible for a given seed and build.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
    double normal() { return normal_(engine_); }
    int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }
    std::uint64_t next() { return engine_(); }
    Mat normal_matrix(Eigen::Index rows, Eigen::Index cols);
    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

bool all_finite(const Mat& m);

/// Row-wise softmax with max subtraction.
Mat softmax_rows(const Mat& logits);

/// Backpropagates dL/dp through p = softmax(z) row-wise.
Mat softmax_rows_backward(const Mat& p, const Mat& grad_p);

}  // namespace polseg
