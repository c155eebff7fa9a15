#include <cmath>

#include "doctest.h"
#include "polseg/engine.hpp"

using namespace polseg;

namespace {

ModelConfig tiny_model(bool use_decoder) {
    ModelConfig m;
    m.vocab = PoLVocab(Direction::EW, {"A", "B", "C", "D"});
    m.features = {"f0", "f1", "f2"};
    m.encoder.hidden = 8;
    m.encoder.layers = 2;
    m.encoder.kernel = 3;
    m.decoder.layers = 2;
    m.decoder.heads = 2;
    m.use_decoder = use_decoder;
    m.diffusion_steps = 50;
    m.infer_steps = 5;
    m.sync_dimensions();
    return m;
}

// Central differences over every parameter entry.
double worst_relative_error(const ModelConfig& m, MaskKind mask, int step) {
    ParameterSet params = init_parameters(m, 7);
    Rng rng(11);
    // Zero-initialized biases put ReLUs exactly on their kink when the
    // condition is fully masked; move off it.
    for (int i = 0; i < params.size(); ++i) params[i] += 0.1 * rng.normal_matrix(params[i].rows(), params[i].cols());
    const int T = 8;
    const Mat x = rng.normal_matrix(T, 3);
    const std::vector<int> labels = {0, 0, 1, 1, 1, 3, 3, 2};
    const std::vector<double> bd = boundary_target(labels, 2.0);
    const Mat noise = rng.normal_matrix(T, 4);
    const ExampleInputs in{x, labels, bd, mask, step, noise};

    const Networks nets(m, params);
    ParameterSet grads = params.zeros_like();
    example_loss(m, nets, params, in, &grads);

    double worst = 0.0;
    const double h = 1e-6;
    for (int i = 0; i < params.size(); ++i) {
        for (Eigen::Index k = 0; k < params[i].size(); ++k) {
            double& w = params[i].data()[k];
            const double saved = w;
            w = saved + h;
            const double up = example_loss(m, nets, params, in).total;
            w = saved - h;
            const double down = example_loss(m, nets, params, in).total;
            w = saved;
            const double numeric = (up - down) / (2 * h);
            const double analytic = grads[i].data()[k];
            const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-4});
            const double rel = std::abs(numeric - analytic) / denom;
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("full loss gradient matches finite differences") {
    const ModelConfig m = tiny_model(true);
    CHECK(worst_relative_error(m, MaskKind::None, 10) < 1e-4);
    CHECK(worst_relative_error(m, MaskKind::None, 40) < 1e-4);
    CHECK(worst_relative_error(m, MaskKind::BoundaryPrior, 40) < 1e-4);
    CHECK(worst_relative_error(m, MaskKind::PositionPrior, 1) < 1e-4);
}

TEST_CASE("encoder-only loss gradient matches finite differences") {
    CHECK(worst_relative_error(tiny_model(false), MaskKind::None, 1) < 1e-4);
}
