#include "polseg/encoder.hpp"

#include <stdexcept>
#include <string>

namespace polseg {

namespace {

std::string block_name(int l, int which) {
    return "enc.block" + std::to_string(l) + ".conv" + std::to_string(which);
}

int centred_shift(int kernel, int dilation) { return ((kernel - 1) * dilation) / 2; }

}  // namespace

void EncoderConfig::validate() const {
    if (d_in < 1) throw std::invalid_argument("encoder: d_in must be >= 1");
    if (hidden < 1) throw std::invalid_argument("encoder: hidden must be >= 1");
    if (layers < 1) throw std::invalid_argument("encoder: layers must be >= 1");
    if (kernel < 1) throw std::invalid_argument("encoder: kernel must be >= 1");
    if (num_classes < 1) throw std::invalid_argument("encoder: num_classes must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("encoder: dropout must be in [0,1)");
}

long EncoderConfig::receptive_field() const {
    long rf = 1;
    for (int l = 1; l <= layers; ++l) rf += static_cast<long>(kernel - 1) * (1L << l);
    return rf;
}

Encoder::Encoder(EncoderConfig cfg, ParameterSet& params, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    const int h = cfg_.hidden;
    Linear::create(params, "enc.input", cfg_.d_in, h, rng);
    for (int l = 1; l <= cfg_.layers; ++l) {
        const int dil = 1 << l;
        DilatedConv::create(params, block_name(l, 1), h, h, cfg_.kernel, dil, centred_shift(cfg_.kernel, dil), rng);
        DilatedConv::create(params, block_name(l, 2), h, h, cfg_.kernel, dil, centred_shift(cfg_.kernel, dil), rng);
    }
    Linear::create(params, "enc.fuse", h * cfg_.layers, h, rng);
    Linear::create(params, "enc.aux", h, cfg_.num_classes, rng);
    bind(params);
}

Encoder::Encoder(EncoderConfig cfg, const ParameterSet& params) : cfg_(cfg) {
    cfg_.validate();
    bind(params);
}

void Encoder::bind(const ParameterSet& params) {
    const int h = cfg_.hidden;
    auto linear = [&](const std::string& name, int in, int out) {
        Linear l{params.id(name + ".weight"), params.id(name + ".bias")};
        if (params[l.weight].rows() != in || params[l.weight].cols() != out)
            throw std::invalid_argument("encoder parameter '" + name + "' has unexpected shape");
        return l;
    };
    input_ = linear("enc.input", cfg_.d_in, h);
    conv1_.clear();
    conv2_.clear();
    for (int l = 1; l <= cfg_.layers; ++l) {
        const int dil = 1 << l;
        for (int which = 1; which <= 2; ++which) {
            DilatedConv c;
            c.weight = params.id(block_name(l, which) + ".weight");
            c.bias = params.id(block_name(l, which) + ".bias");
            c.kernel = cfg_.kernel;
            c.dilation = dil;
            c.shift = centred_shift(cfg_.kernel, dil);
            c.in = h;
            if (params[c.weight].rows() != static_cast<Eigen::Index>(cfg_.kernel) * h || params[c.weight].cols() != h)
                throw std::invalid_argument("encoder parameter '" + block_name(l, which) + "' has unexpected shape");
            (which == 1 ? conv1_ : conv2_).push_back(c);
        }
    }
    fuse_ = linear("enc.fuse", h * cfg_.layers, h);
    aux_ = linear("enc.aux", h, cfg_.num_classes);
}

EncoderOutput Encoder::forward(const ParameterSet& p, const Mat& x, Rng* rng, EncoderCache* cache) const {
    if (x.cols() != cfg_.d_in)
        throw std::invalid_argument("encoder: input has " + std::to_string(x.cols()) + " features, expected " +
                                    std::to_string(cfg_.d_in));
    if (x.rows() < 1) throw std::invalid_argument("encoder: empty input");
    const Eigen::Index T = x.rows();
    const int h = cfg_.hidden;

    Mat a = input_.forward(p, x);
    Mat concat(T, static_cast<Eigen::Index>(h) * cfg_.layers);
    if (cache) {
        cache->input = x;
        cache->projected = a;
        cache->block_in.clear();
        cache->conv1_pre.clear();
        cache->conv1_act.clear();
        cache->conv2_out.clear();
        cache->drop.clear();
    }
    for (int l = 0; l < cfg_.layers; ++l) {
        Mat u = conv1_[static_cast<std::size_t>(l)].forward(p, a);
        Mat r = relu(u);
        Mat v = conv2_[static_cast<std::size_t>(l)].forward(p, r);
        DropoutMask drop = DropoutMask::sample(T, h, cfg_.dropout, rng);
        Mat next = a + drop.apply(v);
        if (cache) {
            cache->block_in.push_back(std::move(a));
            cache->conv1_pre.push_back(std::move(u));
            cache->conv1_act.push_back(std::move(r));
            cache->conv2_out.push_back(std::move(v));
            cache->drop.push_back(std::move(drop));
        }
        concat.middleCols(static_cast<Eigen::Index>(l) * h, h) = next;
        a = std::move(next);
    }
    EncoderOutput out;
    out.embedding = fuse_.forward(p, concat);
    out.aux_logits = aux_.forward(p, out.embedding);
    if (cache) {
        cache->concat = std::move(concat);
        cache->embedding = out.embedding;
    }
    return out;
}

void Encoder::backward(const ParameterSet& p, ParameterSet& grads, const EncoderCache& cache, const Mat& d_embedding,
                       const Mat& d_aux_logits) const {
    const Eigen::Index T = cache.input.rows();
    const int h = cfg_.hidden;
    Mat d_emb = d_embedding.size() ? d_embedding : Mat::Zero(T, h);
    if (d_aux_logits.size()) d_emb += aux_.backward(p, grads, cache.embedding, d_aux_logits);
    Mat d_concat = fuse_.backward(p, grads, cache.concat, d_emb);

    Mat d_a = Mat::Zero(T, h);
    for (int l = cfg_.layers - 1; l >= 0; --l) {
        const auto li = static_cast<std::size_t>(l);
        d_a += d_concat.middleCols(static_cast<Eigen::Index>(l) * h, h);
        // next = a + drop(conv2(relu(conv1(a))))
        Mat d_v = cache.drop[li].apply(d_a);
        Mat d_r = conv2_[li].backward(p, grads, cache.conv1_act[li], d_v);
        Mat d_u = relu_backward(cache.conv1_pre[li], d_r);
        d_a += conv1_[li].backward(p, grads, cache.block_in[li], d_u);
    }
    input_.backward(p, grads, cache.input, d_a);
}

}  // namespace polseg
