#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "polseg/config.hpp"
#include "polseg/data.hpp"
#include "polseg/engine.hpp"
#include "polseg/metrics.hpp"

namespace polseg {

/// Where the data comes from and how a trained model is scored.
struct ExperimentConfig {
    SynthConfig synth;
    std::filesystem::path data_dir;   // positional CSVs; empty means synthetic
    std::filesystem::path label_file;
    int crop_length = 0;  // > 0: keep only the first steps of every series
    double split_ratio = 0.8;
    std::uint64_t split_seed = 0;
    Direction direction = Direction::EW;
    ModelConfig model;
    TrainConfig train;
    int infer_steps = 0;  // 0: the model's setting
    std::uint64_t infer_seed = 0;
    double test_noise_std = 0.0;  // Gaussian noise on normalized test inputs
    EditGranularity edit_granularity = EditGranularity::Segments;

    /// Reads `data.*`, `experiment.*`, `infer.*` plus the model and train keys.
    static ExperimentConfig from_config(const Config& cfg);
    Config to_config() const;
};

/// Loads or generates the dataset and splits it.
DatasetSplit prepare_split(const ExperimentConfig& exp);

/// Per-object inference on `objects` scored against their labels.
/// `profile`, when set, degrades each test series first.
struct Evaluation {
    EvalReport report;
    std::vector<ObjectPrediction> predictions;
};
Evaluation evaluate_bundle(const ModelBundle& bundle, const std::vector<LabeledObject>& objects,
                           const ExperimentConfig& exp, const SamplingProfile* profile = nullptr);

enum class Variant { Full, NoDecoder, NoGeodetic, NoSloss, NoMask };
std::string to_string(Variant v);
Variant parse_variant(std::string_view s);
/// The full model configuration with the variant's documented changes.
ModelConfig apply_variant(ModelConfig model, Variant v);

struct RunResult {
    EvalReport report;
    ModelBundle bundle;
    std::vector<ObjectPrediction> predictions;
};

RunResult run_ablation(Variant variant, const ExperimentConfig& exp, const DatasetSplit& split,
                       const ProgressSink& progress = {});

/// Evaluates one trained bundle on each degraded copy of the test split, in
/// profile order.
std::vector<EvalReport> run_robustness(const ModelBundle& bundle, const DatasetSplit& split,
                                       const ExperimentConfig& exp, const std::vector<SamplingProfile>& profiles);

enum class SweepAxis { DiffusionSteps, SequenceLength, NoiseLevel };
std::string to_string(SweepAxis a);
SweepAxis parse_sweep_axis(std::string_view s);
/// Throws when a value is outside the axis's accepted range.
void validate_sweep_values(SweepAxis axis, const std::vector<double>& values);
/// The experiment for one sweep point.
ExperimentConfig sweep_point(const ExperimentConfig& base, SweepAxis axis, double value);

/// Timestamped output directory holding config.snapshot, metrics.json,
/// plots/ and bundles. Reopening an existing directory resumes it.
class RunDirectory {
public:
    static RunDirectory create(const std::filesystem::path& root, const std::string& kind);
    static RunDirectory resume(const std::filesystem::path& dir);

    const std::filesystem::path& path() const { return dir_; }
    std::filesystem::path plots() const { return dir_ / "plots"; }
    void write_snapshot(const Config& cfg, std::uint64_t seed) const;

    /// Per-point results, so interrupted sweeps can continue.
    bool has_point(const std::string& name) const;
    EvalReport load_point(const std::string& name) const;
    void save_point(const std::string& name, const EvalReport& report) const;
    void write_metrics(const nlohmann::json& metrics) const;

private:
    explicit RunDirectory(std::filesystem::path dir) : dir_(std::move(dir)) {}
    std::filesystem::path dir_;
};

/// Version string recorded in output metadata.
std::string version_string();
nlohmann::json metadata_block(const Config& cfg, std::uint64_t seed);

}  // namespace polseg
