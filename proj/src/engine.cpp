#include "polseg/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "polseg/metrics.hpp"

namespace polseg {

// --- configuration ----------------------------------------------------------

void ModelConfig::sync_dimensions() {
    encoder.d_in = static_cast<int>(features.size());
    encoder.num_classes = vocab.size();
    decoder.num_classes = vocab.size();
    decoder.hidden = encoder.hidden;
}

void ModelConfig::validate() const {
    encoder.validate();
    if (use_decoder) decoder.validate();
    if (encoder.d_in != static_cast<int>(features.size()))
        throw std::invalid_argument("model: encoder input width does not match the feature list");
    if (encoder.num_classes != vocab.size() || (use_decoder && decoder.num_classes != vocab.size()))
        throw std::invalid_argument("model: class count does not match the vocabulary");
    if (use_decoder && decoder.hidden != encoder.hidden)
        throw std::invalid_argument("model: encoder and decoder hidden sizes differ");
    if (diffusion_steps < 2) throw std::invalid_argument("model: diffusion.steps must be >= 2");
    if (infer_steps < 1 || infer_steps > diffusion_steps)
        throw std::invalid_argument("model: diffusion.infer_steps must be in [1, diffusion.steps]");
    if (eta < 0) throw std::invalid_argument("model: diffusion.eta must be >= 0");
    if (!(embed_scale > 0)) throw std::invalid_argument("model: diffusion.embed_scale must be positive");
    if (boundary_window < 0) throw std::invalid_argument("model: masking.boundary_window must be >= 0");
    if (input_noise_std < 0) throw std::invalid_argument("model: input noise must be >= 0");
    loss.validate();
}

nlohmann::json ModelConfig::to_json() const {
    nlohmann::json j;
    j["direction"] = to_string(vocab.direction());
    j["classes"] = vocab.classes();
    j["features"] = features;
    j["encoder"] = {{"d_in", encoder.d_in},       {"hidden", encoder.hidden},   {"layers", encoder.layers},
                    {"kernel", encoder.kernel},   {"dropout", encoder.dropout}, {"num_classes", encoder.num_classes}};
    j["decoder"] = {{"hidden", decoder.hidden}, {"layers", decoder.layers},         {"dropout", decoder.dropout},
                    {"kernel", decoder.kernel}, {"heads", decoder.heads},           {"key_dim", decoder.key_dim},
                    {"num_classes", decoder.num_classes}};
    j["diffusion"] = {{"steps", diffusion_steps},           {"infer_steps", infer_steps},
                      {"schedule", to_string(schedule.kind)}, {"beta_start", schedule.beta_start},
                      {"beta_end", schedule.beta_end},      {"eta", eta},
                      {"embed_scale", embed_scale}};
    j["masking"] = {{"boundary_window", boundary_window}, {"enabled", use_mask}};
    j["loss"] = {{"w_ce", loss.ce},
                 {"w_smo", loss.smooth},
                 {"w_bd", loss.boundary},
                 {"w_aux", loss.aux},
                 {"smooth_clamp", loss.smooth_clamp},
                 {"boundary_sigma", loss.boundary_sigma}};
    j["use_decoder"] = use_decoder;
    j["input_noise_std"] = input_noise_std;
    return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    ModelConfig m;
    m.vocab = PoLVocab(parse_direction(j.at("direction").get<std::string>()), j.at("classes").get<std::vector<std::string>>());
    m.features = j.at("features").get<std::vector<std::string>>();
    const auto& e = j.at("encoder");
    m.encoder = {e.at("d_in").get<int>(),     e.at("hidden").get<int>(),      e.at("layers").get<int>(),
                 e.at("kernel").get<int>(),   e.at("dropout").get<double>(),  e.at("num_classes").get<int>()};
    const auto& d = j.at("decoder");
    m.decoder.hidden = d.at("hidden").get<int>();
    m.decoder.layers = d.at("layers").get<int>();
    m.decoder.dropout = d.at("dropout").get<double>();
    m.decoder.kernel = d.at("kernel").get<int>();
    m.decoder.heads = d.at("heads").get<int>();
    m.decoder.key_dim = d.at("key_dim").get<int>();
    m.decoder.num_classes = d.at("num_classes").get<int>();
    const auto& df = j.at("diffusion");
    m.diffusion_steps = df.at("steps").get<int>();
    m.infer_steps = df.at("infer_steps").get<int>();
    m.schedule.kind = parse_schedule_kind(df.at("schedule").get<std::string>());
    m.schedule.beta_start = df.at("beta_start").get<double>();
    m.schedule.beta_end = df.at("beta_end").get<double>();
    m.eta = df.at("eta").get<double>();
    m.embed_scale = df.at("embed_scale").get<double>();
    m.boundary_window = j.at("masking").at("boundary_window").get<int>();
    m.use_mask = j.at("masking").at("enabled").get<bool>();
    const auto& l = j.at("loss");
    m.loss.ce = l.at("w_ce").get<double>();
    m.loss.smooth = l.at("w_smo").get<double>();
    m.loss.boundary = l.at("w_bd").get<double>();
    m.loss.aux = l.at("w_aux").get<double>();
    m.loss.smooth_clamp = l.at("smooth_clamp").get<double>();
    m.loss.boundary_sigma = l.at("boundary_sigma").get<double>();
    m.use_decoder = j.at("use_decoder").get<bool>();
    m.input_noise_std = j.value("input_noise_std", 0.0);
    m.validate();
    return m;
}

ModelConfig ModelConfig::from_config(const Config& c, Direction direction, ModelConfig m) {
    const std::string dir = direction == Direction::EW ? "ew" : "ns";
    if (c.has("vocab." + dir)) {
        std::vector<std::string> classes;
        std::stringstream ss(c.get_string("vocab." + dir, ""));
        std::string item;
        while (std::getline(ss, item, ',')) classes.push_back(item);
        m.vocab = PoLVocab(direction, classes);
    } else if (m.vocab.direction() != direction) {
        m.vocab = PoLVocab::default_for(direction);
    }
    if (c.has("model.features")) {
        m.features.clear();
        std::stringstream ss(c.get_string("model.features", ""));
        std::string item;
        while (std::getline(ss, item, ',')) m.features.push_back(item);
    }
    m.encoder.hidden = c.get_int("encoder.hidden", m.encoder.hidden);
    m.encoder.layers = c.get_int("encoder.layers", m.encoder.layers);
    m.encoder.kernel = c.get_int("encoder.kernel", m.encoder.kernel);
    m.encoder.dropout = c.get_double("encoder.dropout", m.encoder.dropout);
    m.decoder.layers = c.get_int("decoder.layers", m.decoder.layers);
    m.decoder.dropout = c.get_double("decoder.dropout", m.decoder.dropout);
    m.decoder.kernel = c.get_int("decoder.kernel", m.decoder.kernel);
    m.decoder.heads = c.get_int("decoder.heads", m.decoder.heads);
    m.decoder.key_dim = c.get_int("decoder.key_dim", m.decoder.key_dim);
    m.diffusion_steps = c.get_int("diffusion.steps", m.diffusion_steps);
    m.infer_steps = c.get_int("diffusion.infer_steps", m.infer_steps);
    m.schedule.kind = parse_schedule_kind(c.get_string("diffusion.schedule", to_string(m.schedule.kind)));
    m.schedule.beta_start = c.get_double("diffusion.beta_start", m.schedule.beta_start);
    m.schedule.beta_end = c.get_double("diffusion.beta_end", m.schedule.beta_end);
    m.eta = c.get_double("diffusion.eta", m.eta);
    m.embed_scale = c.get_double("diffusion.embed_scale", m.embed_scale);
    m.boundary_window = c.get_int("masking.boundary_window", m.boundary_window);
    m.use_mask = c.get_bool("masking.enabled", m.use_mask);
    m.loss.ce = c.get_double("loss.w_ce", m.loss.ce);
    m.loss.smooth = c.get_double("loss.w_smo", m.loss.smooth);
    m.loss.boundary = c.get_double("loss.w_bd", m.loss.boundary);
    m.loss.aux = c.get_double("loss.w_aux", m.loss.aux);
    m.loss.smooth_clamp = c.get_double("loss.smooth_clamp", m.loss.smooth_clamp);
    m.loss.boundary_sigma = c.get_double("loss.boundary_sigma", m.loss.boundary_sigma);
    m.use_decoder = c.get_bool("model.use_decoder", m.use_decoder);
    m.input_noise_std = c.get_double("model.input_noise_std", m.input_noise_std);
    m.sync_dimensions();
    m.validate();
    return m;
}

ModelConfig ModelConfig::from_config(const Config& c, Direction direction) {
    ModelConfig base;
    base.vocab = PoLVocab::default_for(direction);
    return from_config(c, direction, base);
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    if (!(lr > 0)) throw std::invalid_argument("train: lr must be positive");
    if (weight_decay < 0 || lr_decay < 0) throw std::invalid_argument("train: decay terms must be >= 0");
    if (max_iters < 0) throw std::invalid_argument("train: max_iters must be >= 0");
    if (validation_fraction < 0 || validation_fraction >= 1)
        throw std::invalid_argument("train: validation_fraction must be in [0,1)");
    if (downsample_prob < 0 || downsample_prob > 1) throw std::invalid_argument("train: downsample_prob must be in [0,1]");
    if (downsample_prob > 0 && !(downsample_max_hours > kGridHours))
        throw std::invalid_argument("train: downsample_max_hours must exceed the 2 h grid");
}

nlohmann::json TrainConfig::to_json() const {
    return {{"batch_size", batch_size},     {"lr", lr},
            {"weight_decay", weight_decay}, {"lr_decay", lr_decay},
            {"max_iters", max_iters},       {"seed", seed},
            {"checkpoint_every", checkpoint_every}, {"validation_fraction", validation_fraction},
            {"downsample_prob", downsample_prob}, {"downsample_max_hours", downsample_max_hours}};
}

TrainConfig TrainConfig::from_config(const Config& c, TrainConfig t) {
    t.batch_size = c.get_int("train.batch_size", t.batch_size);
    t.lr = c.get_double("train.lr", t.lr);
    t.weight_decay = c.get_double("train.weight_decay", t.weight_decay);
    t.lr_decay = c.get_double("train.lr_decay", t.lr_decay);
    t.max_iters = c.get_int("train.max_iters", t.max_iters);
    t.seed = c.get_u64("train.seed", t.seed);
    t.log_every = c.get_int("train.log_every", t.log_every);
    t.checkpoint_every = c.get_int("train.checkpoint_every", t.checkpoint_every);
    t.downsample_prob = c.get_double("train.downsample_prob", t.downsample_prob);
    t.downsample_max_hours = c.get_double("train.downsample_max_hours", t.downsample_max_hours);
    if (c.has("train.checkpoint_dir")) t.checkpoint_dir = c.get_string("train.checkpoint_dir", "");
    t.validation_fraction = c.get_double("train.validation_fraction", t.validation_fraction);
    t.validate();
    return t;
}

TrainConfig TrainConfig::from_config(const Config& c) { return from_config(c, TrainConfig{}); }

// --- networks ---------------------------------------------------------------

ParameterSet init_parameters(const ModelConfig& model, std::uint64_t seed) {
    model.validate();
    ParameterSet params;
    Rng rng(seed);
    Encoder(model.encoder, params, rng);
    if (model.use_decoder) Decoder(model.decoder, params, rng);
    return params;
}

Networks::Networks(const ModelConfig& model, const ParameterSet& params) : encoder(model.encoder, params) {
    if (model.use_decoder) decoder.emplace(model.decoder, params);
}

TotalLoss example_loss(const ModelConfig& model, const Networks& nets, const ParameterSet& params,
                       const ExampleInputs& in, ParameterSet* grads, double grad_scale, Rng* dropout_rng) {
    const bool backprop = grads != nullptr;
    EncoderCache enc_cache;
    EncoderOutput enc = nets.encoder.forward(params, in.features, dropout_rng, backprop ? &enc_cache : nullptr);
    const Mat p_aux = softmax_rows(enc.aux_logits);

    if (!nets.decoder) {
        TotalLoss loss = total_loss(Mat(), p_aux, in.labels, in.boundary, model.loss, backprop);
        if (backprop)
            nets.encoder.backward(params, *grads, enc_cache, Mat(), grad_scale * softmax_rows_backward(p_aux, loss.grad_aux));
        return loss;
    }

    const int T = static_cast<int>(in.labels.size());
    const ConditionMask mask = make_mask(in.mask, T, &in.labels, model.boundary_window);
    const Mat condition = mask.apply(enc.embedding);
    const NoiseSchedule sched = make_schedule(model.diffusion_steps, model.schedule);
    const Mat x0 = encode_labels(in.labels, model.vocab.size(), model.embed_scale);
    const Mat noised = forward_diffuse(x0, in.step, sched, in.noise);

    DecoderCache dec_cache;
    const Mat p_dec = nets.decoder->forward(params, noised, condition, in.step, dropout_rng, backprop ? &dec_cache : nullptr);
    TotalLoss loss = total_loss(p_dec, p_aux, in.labels, in.boundary, model.loss, backprop);
    if (backprop) {
        const Mat d_logits = grad_scale * softmax_rows_backward(p_dec, loss.grad_dec);
        const Mat d_condition = nets.decoder->backward(params, *grads, dec_cache, d_logits);
        Mat d_aux;
        if (loss.grad_aux.size()) d_aux = grad_scale * softmax_rows_backward(p_aux, loss.grad_aux);
        nets.encoder.backward(params, *grads, enc_cache, mask.apply(d_condition), d_aux);
    }
    return loss;
}

// --- training ---------------------------------------------------------------

namespace {

struct PreparedExample {
    std::string object_id;
    OrbitSeries raw;  // selected features before normalization
    Mat features;
    std::vector<int> labels;
    std::vector<double> boundary;
};

std::vector<PreparedExample> prepare(const std::vector<LabeledObject>& objects, const ModelConfig& model,
                                     const NormStats& norm, Rng* noise_rng) {
    std::vector<PreparedExample> out;
    for (const auto& o : objects) {
        PreparedExample ex;
        ex.object_id = o.series.object_id;
        ex.raw = select_features(o.series, model.features);
        ex.features = apply_normalizer(ex.raw, norm).values;
        if (noise_rng && model.input_noise_std > 0)
            ex.features += model.input_noise_std * noise_rng->normal_matrix(ex.features.rows(), ex.features.cols());
        const LabelSeq& y = o.labels(model.direction());
        if (y.length() != o.series.length())
            throw std::invalid_argument(o.series.object_id + ": label length does not match series length");
        y.validate(model.vocab.size());
        ex.labels = y.labels;
        ex.boundary = boundary_target(ex.labels, model.loss.boundary_sigma);
        out.push_back(std::move(ex));
    }
    return out;
}

double validation_accuracy(const ModelBundle& bundle, const std::vector<LabeledObject>& val) {
    double sum = 0.0;
    for (const auto& o : val) sum += accuracy(o.labels(bundle.model.direction()).labels, infer(bundle, o.series).labels);
    return val.empty() ? 0.0 : sum / static_cast<double>(val.size());
}

}  // namespace

ModelBundle train(const DatasetSplit& split, ModelConfig model, const TrainConfig& cfg, const ProgressSink& progress) {
    model.sync_dimensions();
    model.validate();
    cfg.validate();
    if (split.train.empty()) throw std::invalid_argument("train: empty training split");
    for (const auto& o : split.train) {
        const LabelSeq& y = o.labels(model.direction());
        if (y.direction != model.direction())
            throw std::invalid_argument(o.series.object_id + ": labels are not for direction " + to_string(model.direction()));
        if (y.labels.empty()) throw std::invalid_argument(o.series.object_id + ": no labels for the chosen direction");
    }

    const auto t_start = std::chrono::steady_clock::now();
    Rng rng(cfg.seed);

    std::vector<LabeledObject> train_objs = split.train;
    std::vector<LabeledObject> val_objs;
    if (cfg.validation_fraction > 0 && train_objs.size() >= 2) {
        DatasetSplit inner = polseg::split(train_objs, 1.0 - cfg.validation_fraction, cfg.seed ^ 0x5eedULL);
        train_objs = std::move(inner.train);
        val_objs = std::move(inner.test);
    }

    ModelBundle bundle;
    bundle.model = model;
    std::vector<OrbitSeries> series;
    for (const auto& o : train_objs) series.push_back(select_features(o.series, model.features));
    bundle.norm = fit_normalizer(series, progress ? WarningSink([&](const std::string& w) { progress("warning: " + w); })
                                                  : WarningSink{});
    bundle.params = init_parameters(model, cfg.seed);
    bundle.meta.seed = cfg.seed;

    Rng noise_rng(cfg.seed ^ 0xa5a5a5a5ULL);
    const std::vector<PreparedExample> examples = prepare(train_objs, model, bundle.norm, &noise_rng);
    const Networks nets(model, bundle.params);
    ParameterSet grads = bundle.params.zeros_like();
    Adam adam(bundle.params, {cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay, cfg.lr_decay});

    std::vector<int> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = order.size();
    double best_val = -1.0;
    const int C = model.vocab.size();

    for (int it = 0; it < cfg.max_iters; ++it) {
        grads.set_zero();
        double batch_loss = 0.0;
        TotalLoss parts;
        for (int b = 0; b < cfg.batch_size; ++b) {
            if (cursor >= order.size()) {
                for (std::size_t i = order.size(); i-- > 1;)
                    std::swap(order[i], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i)))]);
                cursor = 0;
            }
            const PreparedExample& ex = examples[static_cast<std::size_t>(order[cursor++])];
            Mat degraded;
            if (cfg.downsample_prob > 0 && rng.uniform() < cfg.downsample_prob) {
                SamplingProfile profile;
                profile.mean_interval_hours = kGridHours + (cfg.downsample_max_hours - kGridHours) * rng.uniform();
                const OrbitSeries filled = forward_fill(ex.raw, sample_observations(ex.raw.length(), profile, rng));
                degraded = apply_normalizer(filled, bundle.norm).values;
            }
            const Mat& features = degraded.size() > 0 ? degraded : ex.features;
            const MaskKind kind = model.use_mask ? sample_mask_kind(rng) : MaskKind::None;
            const int step = rng.uniform_int(1, model.diffusion_steps);
            const Mat noise = rng.normal_matrix(static_cast<Eigen::Index>(ex.labels.size()), C);
            const ExampleInputs in{features, ex.labels, ex.boundary, kind, step, noise};
            const TotalLoss loss = example_loss(model, nets, bundle.params, in, &grads, 1.0 / cfg.batch_size, &rng);
            if (!std::isfinite(loss.total)) {
                std::ostringstream msg;
                msg << "non-finite loss at iteration " << it << " (object " << ex.object_id << ", step " << step
                    << ", mask " << to_string(kind) << "): ce=" << loss.ce << " smo=" << loss.smooth
                    << " bd=" << loss.boundary << " aux=" << loss.aux;
                throw std::runtime_error(msg.str());
            }
            batch_loss += loss.total / cfg.batch_size;
            parts.ce += loss.ce / cfg.batch_size;
            parts.smooth += loss.smooth / cfg.batch_size;
            parts.boundary += loss.boundary / cfg.batch_size;
            parts.aux += loss.aux / cfg.batch_size;
        }
        if (!grads.all_finite()) throw std::runtime_error("non-finite gradient at iteration " + std::to_string(it));
        adam.step(bundle.params, grads);
        bundle.meta.loss_curve.push_back(batch_loss);
        bundle.meta.iterations = it + 1;

        if (progress && cfg.log_every > 0 && (it + 1) % cfg.log_every == 0) {
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
            std::ostringstream msg;
            msg << "iter " << it + 1 << "/" << cfg.max_iters << " loss " << batch_loss << " [ce " << parts.ce << " smo "
                << parts.smooth << " bd " << parts.boundary << " aux " << parts.aux << "] (" << secs << " s)";
            progress(msg.str());
        }
        if (cfg.checkpoint_every > 0 && !cfg.checkpoint_dir.empty() && (it + 1) % cfg.checkpoint_every == 0) {
            std::filesystem::create_directories(cfg.checkpoint_dir);
            save_bundle(bundle, cfg.checkpoint_dir / ("iter" + std::to_string(it + 1) + ".bin"));
            if (!val_objs.empty()) {
                const double acc = validation_accuracy(bundle, val_objs);
                if (progress) progress("validation accuracy " + std::to_string(acc));
                if (acc > best_val) {
                    best_val = acc;
                    save_bundle(bundle, cfg.checkpoint_dir / "best.bin");
                }
            }
        }
    }
    bundle.meta.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return bundle;
}

// --- inference --------------------------------------------------------------

void check_vocab(const ModelBundle& bundle, const PoLVocab& vocab) {
    if (bundle.model.vocab.direction() != vocab.direction())
        throw std::invalid_argument("vocabulary mismatch: bundle was trained for " +
                                    to_string(bundle.model.vocab.direction()) + ", requested " +
                                    to_string(vocab.direction()));
    if (!(bundle.model.vocab == vocab)) throw std::invalid_argument("vocabulary mismatch: class lists differ");
}

InferResult infer(const ModelBundle& bundle, const OrbitSeries& series, int infer_steps, std::uint64_t seed,
                  bool keep_snapshots) {
    const ModelConfig& m = bundle.model;
    if (series.length() < 1) throw std::invalid_argument("infer: empty series");
    const Mat x = apply_normalizer(select_features(series, m.features), bundle.norm).values;
    const Networks nets(m, bundle.params);
    const EncoderOutput enc = nets.encoder.forward(bundle.params, x);

    InferResult r;
    if (!nets.decoder) {
        r.probabilities = softmax_rows(enc.aux_logits);
        r.labels = decode_labels(r.probabilities);
        return r;
    }

    const int steps = infer_steps > 0 ? infer_steps : m.infer_steps;
    const NoiseSchedule sched = make_schedule(m.diffusion_steps, m.schedule);
    const std::vector<int> visit = skip_steps(m.diffusion_steps, steps);
    Rng rng(seed);
    const int C = m.vocab.size();
    Mat state = rng.normal_matrix(series.length(), C);
    const Mat condition = make_mask(MaskKind::None, series.length(), nullptr, 0).apply(enc.embedding);
    for (std::size_t i = 0; i + 1 < visit.size(); ++i) {
        if (keep_snapshots) {
            r.snapshot_steps.push_back(visit[i]);
            r.snapshots.push_back(decode_labels(state));
        }
        r.probabilities = nets.decoder->forward(bundle.params, state, condition, visit[i]);
        const Mat x0_hat = m.embed_scale * (2.0 * r.probabilities.array() - 1.0);
        state = ddim_step(state, visit[i], visit[i + 1], x0_hat, sched, m.eta, &rng);
    }
    r.labels = decode_labels(state);
    if (keep_snapshots) {
        r.snapshot_steps.push_back(0);
        r.snapshots.push_back(r.labels);
    }
    return r;
}

}  // namespace polseg
