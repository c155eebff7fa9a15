#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "polseg/config.hpp"
#include "polseg/data.hpp"
#include "polseg/decoder.hpp"
#include "polseg/diffusion.hpp"
#include "polseg/encoder.hpp"
#include "polseg/losses.hpp"

namespace polseg {

/// Everything needed to rebuild the networks and run inference.
struct ModelConfig {
    PoLVocab vocab = PoLVocab::default_for(Direction::EW);
    std::vector<std::string> features = canonical_features();
    EncoderConfig encoder;
    DecoderConfig decoder;
    int diffusion_steps = 1000;
    int infer_steps = 25;
    ScheduleParams schedule;
    double eta = 0.0;
    double embed_scale = 1.0;
    int boundary_window = 2;
    LossWeights loss;
    bool use_decoder = true;       // false: encoder auxiliary head only
    bool use_mask = true;          // false: mask kind is always `none`
    double input_noise_std = 0.0;  // Gaussian noise on normalized training inputs

    Direction direction() const { return vocab.direction(); }
    /// Fills dimensions that follow from the vocabulary and feature list.
    void sync_dimensions();
    void validate() const;

    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
    /// Reads `model.*`, `encoder.*`, `decoder.*`, `diffusion.*`, `masking.*`,
    /// `loss.*` keys over the given base.
    static ModelConfig from_config(const Config& cfg, Direction direction, ModelConfig base);
    static ModelConfig from_config(const Config& cfg, Direction direction);
};

struct TrainConfig {
    int batch_size = 4;
    double lr = 5e-4;
    double weight_decay = 1e-5;
    double lr_decay = 0.0;
    int max_iters = 2000;
    std::uint64_t seed = 0;
    int log_every = 100;
    int checkpoint_every = 0;  // 0 disables periodic checkpoints
    std::filesystem::path checkpoint_dir;
    double validation_fraction = 0.0;  // held out of the training split for best-checkpoint selection
    /// Chance that a training example is replaced by a forward-filled copy
    /// observed at a random mean interval in [2 h, downsample_max_hours].
    double downsample_prob = 0.0;
    double downsample_max_hours = 24.0;

    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_config(const Config& cfg, TrainConfig base);
    static TrainConfig from_config(const Config& cfg);
};

struct TrainMeta {
    std::uint64_t seed = 0;
    int iterations = 0;
    std::vector<double> loss_curve;  // mean batch loss per iteration
    double seconds = 0.0;
};

struct ModelBundle {
    ModelConfig model;
    NormStats norm;
    ParameterSet params;
    TrainMeta meta;
};

/// Fresh parameters for `model` drawn from `seed`.
ParameterSet init_parameters(const ModelConfig& model, std::uint64_t seed);

/// Encoder and (optional) decoder bound to one parameter set.
struct Networks {
    Networks(const ModelConfig& model, const ParameterSet& params);

    Encoder encoder;
    std::optional<Decoder> decoder;
};

/// One training example at a fixed diffusion step, mask and noise draw.
struct ExampleInputs {
    const Mat& features;  // normalized, T x d
    const std::vector<int>& labels;
    const std::vector<double>& boundary;
    MaskKind mask = MaskKind::None;
    int step = 1;
    const Mat& noise;  // T x C
};

/// Forward pass and loss; when `grads` is non-null also backpropagates and
/// accumulates grad_scale * dL/dparams. `dropout_rng` null disables dropout.
TotalLoss example_loss(const ModelConfig& model, const Networks& nets, const ParameterSet& params,
                       const ExampleInputs& in, ParameterSet* grads = nullptr, double grad_scale = 1.0,
                       Rng* dropout_rng = nullptr);

using ProgressSink = std::function<void(const std::string&)>;

/// Joint encoder/decoder training on `split.train`. The test split is never
/// read.
ModelBundle train(const DatasetSplit& split, ModelConfig model, const TrainConfig& cfg,
                  const ProgressSink& progress = {});

struct InferResult {
    std::vector<int> labels;
    Mat probabilities;                       // final T x C
    std::vector<int> snapshot_steps;         // S, S - stride, ..., 0
    std::vector<std::vector<int>> snapshots; // decoded state at each step
};

/// Feature selection, normalization with the bundle's statistics, encoding
/// and skipped-step reverse sampling from N(0, I) drawn with `seed`.
/// `infer_steps` <= 0 uses the bundle's setting.
InferResult infer(const ModelBundle& bundle, const OrbitSeries& series, int infer_steps = 0, std::uint64_t seed = 0,
                  bool keep_snapshots = false);

/// Throws when the bundle was trained for another direction or vocabulary.
void check_vocab(const ModelBundle& bundle, const PoLVocab& vocab);

inline constexpr std::uint32_t kBundleVersion = 1;

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_bundle(const std::filesystem::path& path);

}  // namespace polseg
