#include "polseg/harness.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <sstream>
#include <stdexcept>

#ifndef POLSEG_VERSION
#define POLSEG_VERSION "0.0.0"
#endif

namespace polseg {

namespace fs = std::filesystem;

namespace {

std::string fmt_double(double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items) out += (out.empty() ? "" : ",") + s;
    return out;
}

OrbitSeries crop(const OrbitSeries& s, int length) {
    OrbitSeries out = s;
    out.values = s.values.topRows(length);
    out.timestamps.resize(static_cast<std::size_t>(length));
    return out;
}

LabelSeq crop(const LabelSeq& y, int length) {
    LabelSeq out = y;
    out.labels.resize(static_cast<std::size_t>(length));
    return out;
}

}  // namespace

// --- configuration ----------------------------------------------------------

ExperimentConfig ExperimentConfig::from_config(const Config& c) {
    ExperimentConfig e;
    e.synth.n_objects = c.get_int("data.n_objects", e.synth.n_objects);
    e.synth.length = c.get_int("data.length", e.synth.length);
    e.synth.seed = c.get_u64("data.seed", e.synth.seed);
    e.synth.noise_std = c.get_double("data.noise_std", e.synth.noise_std);
    e.synth.min_segment = c.get_int("data.min_segment", e.synth.min_segment);
    e.synth.deadband_deg = c.get_double("data.deadband_deg", e.synth.deadband_deg);
    e.synth.drift_rate_min = c.get_double("data.drift_rate_min", e.synth.drift_rate_min);
    e.synth.drift_rate_max = c.get_double("data.drift_rate_max", e.synth.drift_rate_max);
    e.synth.daily_amplitude_deg = c.get_double("data.daily_amplitude_deg", e.synth.daily_amplitude_deg);
    e.synth.validate();
    if (c.has("data.dir")) e.data_dir = c.get_string("data.dir", "");
    if (c.has("data.labels")) e.label_file = c.get_string("data.labels", "");
    if (!e.data_dir.empty() && e.label_file.empty()) e.label_file = e.data_dir.parent_path() / "labels.csv";
    e.crop_length = c.get_int("data.crop_length", e.crop_length);
    e.split_ratio = c.get_double("data.split_ratio", e.split_ratio);
    e.split_seed = c.get_u64("data.split_seed", e.split_seed);
    if (!(e.split_ratio > 0 && e.split_ratio < 1)) throw std::invalid_argument("data.split_ratio must be in (0,1)");
    e.direction = parse_direction(c.get_string("experiment.direction", "EW"));
    e.model = ModelConfig::from_config(c, e.direction);
    e.train = TrainConfig::from_config(c);
    e.infer_steps = c.get_int("infer.steps", e.infer_steps);
    e.infer_seed = c.get_u64("infer.seed", e.infer_seed);
    e.test_noise_std = c.get_double("infer.test_noise_std", e.test_noise_std);
    if (e.test_noise_std < 0) throw std::invalid_argument("infer.test_noise_std must be >= 0");
    const std::string gran = c.get_string("eval.edit_granularity", "segments");
    if (gran == "segments") e.edit_granularity = EditGranularity::Segments;
    else if (gran == "frames") e.edit_granularity = EditGranularity::Frames;
    else throw std::invalid_argument("eval.edit_granularity must be 'segments' or 'frames'");
    return e;
}

Config ExperimentConfig::to_config() const {
    Config c;
    c.set("data.n_objects", std::to_string(synth.n_objects));
    c.set("data.length", std::to_string(synth.length));
    c.set("data.seed", std::to_string(synth.seed));
    c.set("data.noise_std", fmt_double(synth.noise_std));
    c.set("data.min_segment", std::to_string(synth.min_segment));
    c.set("data.deadband_deg", fmt_double(synth.deadband_deg));
    c.set("data.drift_rate_min", fmt_double(synth.drift_rate_min));
    c.set("data.drift_rate_max", fmt_double(synth.drift_rate_max));
    c.set("data.daily_amplitude_deg", fmt_double(synth.daily_amplitude_deg));
    if (!data_dir.empty()) c.set("data.dir", data_dir.string());
    if (!label_file.empty()) c.set("data.labels", label_file.string());
    c.set("data.crop_length", std::to_string(crop_length));
    c.set("data.split_ratio", fmt_double(split_ratio));
    c.set("data.split_seed", std::to_string(split_seed));
    c.set("experiment.direction", to_string(direction));
    c.set(direction == Direction::EW ? "vocab.ew" : "vocab.ns", join(model.vocab.classes()));
    c.set("model.features", join(model.features));
    c.set("model.use_decoder", model.use_decoder ? "true" : "false");
    c.set("model.input_noise_std", fmt_double(model.input_noise_std));
    c.set("encoder.hidden", std::to_string(model.encoder.hidden));
    c.set("encoder.layers", std::to_string(model.encoder.layers));
    c.set("encoder.kernel", std::to_string(model.encoder.kernel));
    c.set("encoder.dropout", fmt_double(model.encoder.dropout));
    c.set("decoder.layers", std::to_string(model.decoder.layers));
    c.set("decoder.dropout", fmt_double(model.decoder.dropout));
    c.set("decoder.kernel", std::to_string(model.decoder.kernel));
    c.set("decoder.heads", std::to_string(model.decoder.heads));
    c.set("decoder.key_dim", std::to_string(model.decoder.key_dim));
    c.set("diffusion.steps", std::to_string(model.diffusion_steps));
    c.set("diffusion.infer_steps", std::to_string(model.infer_steps));
    c.set("diffusion.schedule", to_string(model.schedule.kind));
    c.set("diffusion.beta_start", fmt_double(model.schedule.beta_start));
    c.set("diffusion.beta_end", fmt_double(model.schedule.beta_end));
    c.set("diffusion.eta", fmt_double(model.eta));
    c.set("diffusion.embed_scale", fmt_double(model.embed_scale));
    c.set("masking.enabled", model.use_mask ? "true" : "false");
    c.set("masking.boundary_window", std::to_string(model.boundary_window));
    c.set("loss.w_ce", fmt_double(model.loss.ce));
    c.set("loss.w_smo", fmt_double(model.loss.smooth));
    c.set("loss.w_bd", fmt_double(model.loss.boundary));
    c.set("loss.w_aux", fmt_double(model.loss.aux));
    c.set("loss.smooth_clamp", fmt_double(model.loss.smooth_clamp));
    c.set("loss.boundary_sigma", fmt_double(model.loss.boundary_sigma));
    c.set("train.batch_size", std::to_string(train.batch_size));
    c.set("train.lr", fmt_double(train.lr));
    c.set("train.weight_decay", fmt_double(train.weight_decay));
    c.set("train.lr_decay", fmt_double(train.lr_decay));
    c.set("train.max_iters", std::to_string(train.max_iters));
    c.set("train.seed", std::to_string(train.seed));
    c.set("train.checkpoint_every", std::to_string(train.checkpoint_every));
    c.set("train.validation_fraction", fmt_double(train.validation_fraction));
    c.set("train.downsample_prob", fmt_double(train.downsample_prob));
    c.set("train.downsample_max_hours", fmt_double(train.downsample_max_hours));
    c.set("infer.steps", std::to_string(infer_steps));
    c.set("infer.seed", std::to_string(infer_seed));
    c.set("infer.test_noise_std", fmt_double(test_noise_std));
    c.set("eval.edit_granularity", edit_granularity == EditGranularity::Segments ? "segments" : "frames");
    return c;
}

DatasetSplit prepare_split(const ExperimentConfig& exp) {
    const PoLVocab ew = exp.direction == Direction::EW ? exp.model.vocab : PoLVocab::default_for(Direction::EW);
    const PoLVocab ns = exp.direction == Direction::NS ? exp.model.vocab : PoLVocab::default_for(Direction::NS);
    std::vector<LabeledObject> objects =
        exp.data_dir.empty() ? objects_of(synth_generate(exp.synth, ew, ns)) : load_splid(exp.data_dir, exp.label_file, ew, ns);
    if (exp.crop_length > 0) {
        for (auto& o : objects) {
            if (o.series.length() < exp.crop_length)
                throw std::invalid_argument(o.series.object_id + ": shorter than data.crop_length");
            o.series = crop(o.series, exp.crop_length);
            o.ew = crop(o.ew, exp.crop_length);
            o.ns = crop(o.ns, exp.crop_length);
        }
    }
    return split(objects, exp.split_ratio, exp.split_seed);
}

// --- evaluation -------------------------------------------------------------

Evaluation evaluate_bundle(const ModelBundle& bundle, const std::vector<LabeledObject>& objects,
                           const ExperimentConfig& exp, const SamplingProfile* profile) {
    Evaluation ev;
    const ModelConfig& m = bundle.model;
    for (std::size_t i = 0; i < objects.size(); ++i) {
        const LabeledObject& o = objects[i];
        OrbitSeries x = select_features(o.series, m.features);
        if (profile) x = downsample_forward_fill(x, *profile, i);
        if (exp.test_noise_std > 0) {
            Rng rng(exp.infer_seed ^ (0x9e3779b97f4a7c15ULL * (i + 1)));
            Mat noise = rng.normal_matrix(x.length(), x.dims());
            for (int j = 0; j < x.dims(); ++j) noise.col(j) *= exp.test_noise_std * bundle.norm.scale[static_cast<std::size_t>(j)];
            x.values += noise;
        }
        const InferResult r = infer(bundle, x, exp.infer_steps, exp.infer_seed);
        ev.predictions.push_back({o.series.object_id, o.labels(m.direction()).labels, r.labels});
    }
    ev.report = evaluate(ev.predictions, m.vocab, exp.edit_granularity);
    return ev;
}

// --- ablations --------------------------------------------------------------

std::string to_string(Variant v) {
    switch (v) {
        case Variant::Full: return "full";
        case Variant::NoDecoder: return "no_decoder";
        case Variant::NoGeodetic: return "no_geodetic";
        case Variant::NoSloss: return "no_sloss";
        case Variant::NoMask: return "no_mask";
    }
    return "?";
}

Variant parse_variant(std::string_view s) {
    for (Variant v : {Variant::Full, Variant::NoDecoder, Variant::NoGeodetic, Variant::NoSloss, Variant::NoMask})
        if (s == to_string(v)) return v;
    throw std::invalid_argument("unknown variant '" + std::string(s) +
                                "' (expected full, no_decoder, no_geodetic, no_sloss or no_mask)");
}

ModelConfig apply_variant(ModelConfig m, Variant v) {
    switch (v) {
        case Variant::Full: break;
        case Variant::NoDecoder: m.use_decoder = false; break;
        case Variant::NoGeodetic: m.features = keplerian_features(); break;
        case Variant::NoSloss:
            m.loss.smooth = 0.0;
            m.loss.boundary = 0.0;
            break;
        case Variant::NoMask: m.use_mask = false; break;
    }
    m.sync_dimensions();
    m.validate();
    return m;
}

RunResult run_ablation(Variant variant, const ExperimentConfig& exp, const DatasetSplit& split,
                       const ProgressSink& progress) {
    RunResult r;
    r.bundle = train(split, apply_variant(exp.model, variant), exp.train, progress);
    Evaluation ev = evaluate_bundle(r.bundle, split.test, exp);
    r.report = std::move(ev.report);
    r.predictions = std::move(ev.predictions);
    return r;
}

std::vector<EvalReport> run_robustness(const ModelBundle& bundle, const DatasetSplit& split,
                                       const ExperimentConfig& exp, const std::vector<SamplingProfile>& profiles) {
    if (profiles.empty()) throw std::invalid_argument("robustness: at least one sampling profile is required");
    std::vector<EvalReport> out;
    for (const auto& p : profiles) {
        p.validate();
        out.push_back(evaluate_bundle(bundle, split.test, exp, p.is_identity() ? nullptr : &p).report);
    }
    return out;
}

// --- sensitivity ------------------------------------------------------------

std::string to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::DiffusionSteps: return "diffusion_steps";
        case SweepAxis::SequenceLength: return "sequence_length";
        case SweepAxis::NoiseLevel: return "noise_level";
    }
    return "?";
}

SweepAxis parse_sweep_axis(std::string_view s) {
    for (SweepAxis a : {SweepAxis::DiffusionSteps, SweepAxis::SequenceLength, SweepAxis::NoiseLevel})
        if (s == to_string(a)) return a;
    throw std::invalid_argument("unknown sweep axis '" + std::string(s) +
                                "' (expected diffusion_steps, sequence_length or noise_level)");
}

void validate_sweep_values(SweepAxis axis, const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("sweep: no values given");
    for (double v : values) {
        const bool integral = std::abs(v - std::round(v)) < 1e-9;
        switch (axis) {
            case SweepAxis::DiffusionSteps:
                if (!integral || v < 500 || v > 1500)
                    throw std::invalid_argument("sweep: diffusion_steps values must be integers in [500, 1500], got " +
                                                fmt_double(v));
                break;
            case SweepAxis::SequenceLength:
                if (!integral || v < 24)
                    throw std::invalid_argument("sweep: sequence_length values must be integers >= 24, got " + fmt_double(v));
                break;
            case SweepAxis::NoiseLevel:
                if (!(v >= 0 && v <= 1))
                    throw std::invalid_argument("sweep: noise_level values must be in [0, 1], got " + fmt_double(v));
                break;
        }
    }
}

ExperimentConfig sweep_point(const ExperimentConfig& base, SweepAxis axis, double value) {
    validate_sweep_values(axis, {value});
    ExperimentConfig e = base;
    switch (axis) {
        case SweepAxis::DiffusionSteps: {
            e.model.diffusion_steps = static_cast<int>(std::lround(value));
            e.model.infer_steps = std::min(e.model.infer_steps, e.model.diffusion_steps);
            break;
        }
        case SweepAxis::SequenceLength:
            if (e.data_dir.empty()) e.synth.length = static_cast<int>(std::lround(value));
            else e.crop_length = static_cast<int>(std::lround(value));
            break;
        case SweepAxis::NoiseLevel:
            e.model.input_noise_std = value;
            e.test_noise_std = value;
            break;
    }
    e.model.validate();
    return e;
}

// --- run directories --------------------------------------------------------

std::string version_string() { return POLSEG_VERSION; }

nlohmann::json metadata_block(const Config& cfg, std::uint64_t seed) {
    return {{"version", version_string()}, {"config_hash", cfg.hash()}, {"seed", seed}};
}

RunDirectory RunDirectory::create(const fs::path& root, const std::string& kind) {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm);
    fs::path dir = root / (kind + "_" + stamp);
    for (int k = 1; fs::exists(dir); ++k) dir = root / (kind + "_" + stamp + "-" + std::to_string(k));
    fs::create_directories(dir / "plots");
    fs::create_directories(dir / "points");
    return RunDirectory(dir);
}

RunDirectory RunDirectory::resume(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw std::invalid_argument("cannot resume: " + dir.string() + " is not a directory");
    fs::create_directories(dir / "plots");
    fs::create_directories(dir / "points");
    return RunDirectory(dir);
}

void RunDirectory::write_snapshot(const Config& cfg, std::uint64_t seed) const {
    std::ofstream out(dir_ / "config.snapshot");
    if (!out) throw std::runtime_error("cannot write " + (dir_ / "config.snapshot").string());
    out << "# version = " << version_string() << "\n# config_hash = " << cfg.hash() << "\n# seed = " << seed << "\n"
        << cfg.dump();
}

bool RunDirectory::has_point(const std::string& name) const { return fs::exists(dir_ / "points" / (name + ".json")); }

EvalReport RunDirectory::load_point(const std::string& name) const {
    std::ifstream in(dir_ / "points" / (name + ".json"));
    if (!in) throw std::runtime_error("missing point result " + name);
    return EvalReport::from_json(nlohmann::json::parse(in));
}

void RunDirectory::save_point(const std::string& name, const EvalReport& report) const {
    const fs::path tmp = dir_ / "points" / (name + ".json.tmp");
    {
        std::ofstream out(tmp);
        out << report.to_json().dump(2) << "\n";
        if (!out) throw std::runtime_error("cannot write point result " + name);
    }
    fs::rename(tmp, dir_ / "points" / (name + ".json"));
}

void RunDirectory::write_metrics(const nlohmann::json& metrics) const {
    std::ofstream out(dir_ / "metrics.json");
    out << metrics.dump(2) << "\n";
    if (!out) throw std::runtime_error("cannot write " + (dir_ / "metrics.json").string());
}

}  // namespace polseg
