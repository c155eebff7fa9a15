#include <cmath>

#include "doctest.h"
#include "polseg/decoder.hpp"
#include "polseg/diffusion.hpp"

using namespace polseg;

namespace {

DecoderConfig small_decoder(int heads = 1) {
    DecoderConfig c;
    c.hidden = 8;
    c.layers = 2;
    c.num_classes = 4;
    c.heads = heads;
    return c;
}

// Random non-zero biases so no ReLU sits exactly at zero.
void jitter(ParameterSet& p, Rng& rng) {
    for (int i = 0; i < p.size(); ++i) p[i] += 0.1 * rng.normal_matrix(p[i].rows(), p[i].cols());
}

}  // namespace

TEST_CASE("step embedding: zero step, bounds and distinctness") {
    const RowVec e0 = step_embed(0, 16);
    for (int i = 0; i < 16; ++i) CHECK(e0(i) == (i % 2 == 0 ? 0.0 : 1.0));
    CHECK_THROWS(step_embed(3, 7));

    const int dim = 64;
    std::vector<RowVec> all;
    for (int s = 0; s < 10000; s += 7) all.push_back(step_embed(s, dim));
    for (const auto& e : all) CHECK(e.cwiseAbs().maxCoeff() <= 1.0);
    for (std::size_t i = 1; i < all.size(); ++i)
        CHECK((all[i] - all[i - 1]).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("decoder output is row-stochastic for any step and mask") {
    const DecoderConfig cfg = small_decoder(2);
    ParameterSet params;
    Rng rng(3);
    const Decoder dec(cfg, params, rng);
    jitter(params, rng);
    const int T = 17;
    for (int step : {1, 10, 500, 1000}) {
        const Mat state = rng.normal_matrix(T, cfg.num_classes);
        Mat cond = rng.normal_matrix(T, cfg.hidden);
        for (MaskKind kind : {MaskKind::None, MaskKind::PositionPrior}) {
            const ConditionMask mask = make_mask(kind, T, nullptr, 2);
            const Mat p = dec.forward(params, state, mask.apply(cond), step);
            REQUIRE(p.rows() == T);
            REQUIRE(p.cols() == cfg.num_classes);
            CHECK((p.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-6);
            CHECK(p.minCoeff() >= 0.0);
        }
    }
}

TEST_CASE("decoder is order-aware") {
    const DecoderConfig cfg = small_decoder();
    ParameterSet params;
    Rng rng(5);
    const Decoder dec(cfg, params, rng);
    jitter(params, rng);
    const int T = 12;
    const Mat state = rng.normal_matrix(T, cfg.num_classes);
    const Mat cond = rng.normal_matrix(T, cfg.hidden);
    const Mat p = dec.forward(params, state, cond, 100);

    std::vector<int> perm(T);
    for (int i = 0; i < T; ++i) perm[static_cast<std::size_t>(i)] = (i * 5 + 3) % T;
    Mat ps(T, state.cols()), pc(T, cond.cols()), unpermuted(T, p.cols());
    for (int i = 0; i < T; ++i) {
        ps.row(i) = state.row(perm[static_cast<std::size_t>(i)]);
        pc.row(i) = cond.row(perm[static_cast<std::size_t>(i)]);
    }
    const Mat q = dec.forward(params, ps, pc, 100);
    for (int i = 0; i < T; ++i) unpermuted.row(perm[static_cast<std::size_t>(i)]) = q.row(i);
    CHECK((unpermuted - p).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("cross-attention block: stochastic rows, zero values, single step") {
    const DecoderConfig cfg = small_decoder(2);
    ParameterSet params;
    Rng rng(9);
    const Decoder dec(cfg, params, rng);
    jitter(params, rng);
    const CrossAttentionParams& blk = dec.block(0);

    const int T = 9;
    const Mat cond = rng.normal_matrix(T, cfg.hidden);
    const Mat state = rng.normal_matrix(T, cfg.hidden);
    CrossAttentionCache cache;
    const CrossAttentionOutput out = cross_attention_block(params, blk, cfg.heads, 0.0, cond, state, nullptr, &cache);
    REQUIRE(cache.attn.size() == 2);
    for (const Mat& a : cache.attn) CHECK((a.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-6);
    CHECK((out.cond - (cond + cache.conv_feat)).cwiseAbs().maxCoeff() < 1e-12);

    SUBCASE("zero value projection leaves only the residual paths") {
        ParameterSet zeroed = params;
        zeroed[blk.value.weight].setZero();
        if (blk.value.bias >= 0) zeroed[blk.value.bias].setZero();
        const CrossAttentionOutput z = cross_attention_block(zeroed, blk, cfg.heads, 0.0, cond, state);
        CHECK((z.state - (state + cond)).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((z.cond - out.cond).cwiseAbs().maxCoeff() < 1e-12);
    }

    SUBCASE("T = 1 attends to its single key with weight one") {
        CrossAttentionCache one;
        const Mat c1 = cond.topRows(1), s1 = state.topRows(1);
        const CrossAttentionOutput o = cross_attention_block(params, blk, cfg.heads, 0.0, c1, s1, nullptr, &one);
        for (const Mat& a : one.attn) CHECK(a(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK((o.state - (s1 + c1 + one.v)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("decoder handles full-length sequences") {
    DecoderConfig cfg = small_decoder();
    cfg.num_classes = 5;
    ParameterSet params;
    Rng rng(1);
    const Decoder dec(cfg, params, rng);
    const int T = 2172;
    const Mat p = dec.forward(params, rng.normal_matrix(T, 5), rng.normal_matrix(T, cfg.hidden), 40);
    CHECK(p.rows() == T);
    CHECK(p.cols() == 5);
}
