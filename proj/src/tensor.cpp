#include "polseg/tensor.hpp"

namespace polseg {

Mat Rng::normal_matrix(Eigen::Index rows, Eigen::Index cols) {
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal();
    return m;
}

bool all_finite(const Mat& m) { return m.allFinite(); }

Mat softmax_rows(const Mat& logits) {
    Mat p(logits.rows(), logits.cols());
    for (Eigen::Index t = 0; t < logits.rows(); ++t) {
        const double mx = logits.row(t).maxCoeff();
        p.row(t) = (logits.row(t).array() - mx).exp();
        p.row(t) /= p.row(t).sum();
    }
    return p;
}

Mat softmax_rows_backward(const Mat& p, const Mat& grad_p) {
    Mat dz(p.rows(), p.cols());
    for (Eigen::Index t = 0; t < p.rows(); ++t) {
        const double dot = p.row(t).dot(grad_p.row(t));
        dz.row(t) = p.row(t).array() * (grad_p.row(t).array() - dot);
    }
    return dz;
}

}  // namespace polseg
