#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "polseg/domain.hpp"

namespace polseg {

/// Nominal sampling grid, hours.
inline constexpr double kGridHours = 2.0;

/// Six Keplerian elements followed by the three geodetic coordinates.
const std::vector<std::string>& canonical_features();
const std::vector<std::string>& keplerian_features();
/// Features measured in degrees that wrap at 360.
bool is_circular_feature(const std::string& name);

struct LabeledObject {
    OrbitSeries series;
    LabelSeq ew;
    LabelSeq ns;

    const LabelSeq& labels(Direction d) const { return d == Direction::EW ? ew : ns; }
};

struct DatasetSplit {
    std::vector<LabeledObject> train;
    std::vector<LabeledObject> test;
    std::uint64_t split_seed = 0;
};

// ---------------------------------------------------------------------------
// Synthetic GEO generator

/// One scripted behaviour segment. `rate` is the drift rate in deg/day
/// (EW: longitude, NS: inclination) for ID/AD segments; 0 otherwise.
struct ScriptSegment {
    std::string label;
    int steps = 0;
    double rate = 0.0;
};

struct ForcedScript {
    std::vector<ScriptSegment> ew;  // empty: sample
    std::vector<ScriptSegment> ns;
};

struct SynthConfig {
    int n_objects = 250;
    int length = 720;
    std::uint64_t seed = 0;
    double noise_std = 1.0;  // multiplier on each feature's reference noise level
    int min_segment = 12;

    // East-west grammar.
    double deadband_deg = 0.1;
    double drift_rate_min = 0.05;  // |deg/day|
    double drift_rate_max = 0.5;
    double start_in_drift_prob = 0.3;
    double ck_burn_interval_days = 14.0;
    double hk_burn_interval_days = 10.0;
    double ek_period_days = 3.0;
    double ek_amplitude = 0.15;  // fraction of deadband
    double daily_amplitude_deg = 0.02;
    std::map<std::string, double> ew_mean_duration{{"ID", 200}, {"AD", 160}, {"EK", 360}, {"CK", 360}, {"HK", 360}};

    // North-south grammar.
    double incl_rate_min = 0.003;  // deg/day
    double incl_rate_max = 0.01;
    double ns_ck_burn_interval_days = 14.0;
    std::map<std::string, double> ns_mean_duration{{"ID", 300}, {"AD", 200}, {"EK", 480}, {"CK", 480}, {"HK", 480}};

    /// Per-object scripts overriding the sampled grammar (index = object).
    std::map<int, ForcedScript> forced;

    void validate() const;
};

struct SynthObject {
    LabeledObject object;
    std::vector<ScriptSegment> ew_script;
    std::vector<ScriptSegment> ns_script;
};

std::vector<SynthObject> synth_generate(const SynthConfig& cfg, const PoLVocab& ew_vocab, const PoLVocab& ns_vocab);

/// Drops the scripts.
std::vector<LabeledObject> objects_of(const std::vector<SynthObject>& synth);

// ---------------------------------------------------------------------------
// Sampling-rate degradation

enum class IntervalDistribution { Lognormal, Empirical };

struct SamplingProfile {
    double mean_interval_hours = 13.7;
    double max_interval_hours = 240.0;
    double lognormal_sigma = 1.0;
    IntervalDistribution distribution = IntervalDistribution::Lognormal;
    std::vector<double> empirical_hours;  // samples for the empirical distribution
    std::uint64_t seed = 0;

    void validate() const;
    bool is_identity() const;
    static SamplingProfile from_histogram_file(const std::filesystem::path& path, std::uint64_t seed);
};

/// Draws observation intervals in grid steps. The lognormal location is
/// calibrated so that the expected rounded, capped step count times the
/// grid spacing equals the profile mean.
class IntervalSampler {
public:
    explicit IntervalSampler(const SamplingProfile& profile);
    int draw_steps(Rng& rng) const;
    double expected_steps() const { return expected_steps_; }

private:
    SamplingProfile profile_;
    double mu_ = 0.0;
    int max_steps_ = 1;
    double expected_steps_ = 1.0;
};

/// Observation grid indices (always starting at 0) for a series of length T.
std::vector<int> sample_observations(int length, const SamplingProfile& profile, Rng& rng);

/// Repeats the value of the most recent observation at every grid point.
OrbitSeries forward_fill(const OrbitSeries& series, const std::vector<int>& observed);

/// Observation instants per profile followed by forward fill. T and the
/// timestamps are unchanged. `stream` decorrelates objects sharing one seed.
OrbitSeries downsample_forward_fill(const OrbitSeries& series, const SamplingProfile& profile,
                                    std::uint64_t stream = 0);

// ---------------------------------------------------------------------------
// Normalization

struct NormStats {
    std::vector<std::string> feature_names;
    std::vector<double> mean;
    std::vector<double> scale;  // 1 for zero-variance features (centred only)
    std::vector<bool> circular;

    nlohmann::json to_json() const;
    static NormStats from_json(const nlohmann::json& j);
};

using WarningSink = std::function<void(const std::string&)>;

/// Shifts circular columns by multiples of 360 so consecutive steps differ by
/// at most 180 degrees.
void unwrap_degrees(Mat& values, int column);

/// Per-feature standardization with statistics from `train` only.
NormStats fit_normalizer(const std::vector<OrbitSeries>& train, const WarningSink& warn = {});
OrbitSeries apply_normalizer(const OrbitSeries& series, const NormStats& stats);

/// Fits on `train` and applies to `apply_to`.
std::pair<std::vector<OrbitSeries>, NormStats> normalize(const std::vector<OrbitSeries>& train,
                                                         const std::vector<OrbitSeries>& apply_to,
                                                         const WarningSink& warn = {});

/// Keeps the named columns, in the given order.
OrbitSeries select_features(const OrbitSeries& series, const std::vector<std::string>& names);

// ---------------------------------------------------------------------------
// Splitting

/// Object-level shuffle split; n_train = round(ratio * n), clamped to [1, n-1].
DatasetSplit split(const std::vector<LabeledObject>& dataset, double ratio, std::uint64_t seed);

// ---------------------------------------------------------------------------
// File formats

/// canonical name -> column name in positional files. Lines `canonical=column`.
using FeatureMap = std::map<std::string, std::string>;
FeatureMap read_feature_map(const std::filesystem::path& path);

struct Transition {
    std::string object_id;
    int time_index = 0;
    Direction direction = Direction::EW;
    std::string class_name;
};

/// Without a direction column every row takes `fallback` (an error when unset).
std::vector<Transition> read_transitions(const std::filesystem::path& path,
                                         std::optional<Direction> fallback = std::nullopt);
void write_transitions(const std::filesystem::path& path, const std::vector<Transition>& rows);
std::vector<Transition> to_transitions(const LabelSeq& labels, const PoLVocab& vocab);
/// Dense labels from transitions of one object and direction (forward fill).
LabelSeq labels_from_transitions(const std::string& object_id, Direction direction,
                                 std::vector<Transition> transitions, int length, const PoLVocab& vocab);

/// Positional CSV: header `timestamp,<features...>`; timestamp in hours or
/// ISO-8601 (YYYY-MM-DDTHH:MM:SS[Z]).
OrbitSeries read_series_csv(const std::filesystem::path& path, const std::vector<std::string>& features = {},
                            const FeatureMap& map = {});
void write_series_csv(const std::filesystem::path& path, const OrbitSeries& series);

/// Positional files `<data_dir>/<object_id>.csv` plus a transition label file.
std::vector<LabeledObject> load_splid(const std::filesystem::path& data_dir, const std::filesystem::path& label_file,
                                      const PoLVocab& ew_vocab, const PoLVocab& ns_vocab, const FeatureMap& map = {});

/// Writes `<dir>/series/<id>.csv` and `<dir>/labels.csv`.
void write_dataset(const std::filesystem::path& dir, const std::vector<LabeledObject>& objects,
                   const PoLVocab& ew_vocab, const PoLVocab& ns_vocab);

}  // namespace polseg
