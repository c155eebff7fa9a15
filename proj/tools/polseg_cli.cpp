// polseg: command-line front end for data generation, training, inference,
// evaluation and the experiment harness.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "polseg/config.hpp"
#include "polseg/data.hpp"
#include "polseg/engine.hpp"
#include "polseg/harness.hpp"
#include "polseg/metrics.hpp"
#include "polseg/plot.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace polseg;

namespace {

/// Options shared by every subcommand: layered configuration and the seed.
struct Common {
    std::string config_file;
    std::vector<std::string> assignments;
    std::uint64_t seed = 0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_file, "INI-style configuration file")->check(CLI::ExistingFile);
        cmd->add_option("--set", assignments, "Override a configuration key (key=value), repeatable");
        cmd->add_option("--seed", seed, "Random seed (default 0)");
    }

    /// defaults < file < flags. `seed_keys` receive --seed.
    Config layered(const std::vector<std::string>& seed_keys, const std::map<std::string, std::string>& flags = {}) const {
        Config cfg;
        if (!config_file.empty()) cfg = Config::from_file(config_file);
        for (const auto& k : seed_keys) cfg.set(k, std::to_string(seed));
        for (const auto& [k, v] : flags) cfg.set(k, v);
        for (const auto& a : assignments) cfg.set_assignment(a);
        return cfg;
    }
};

void write_json(const fs::path& path, const json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

fs::path sidecar(const fs::path& output) { return fs::path(output.string() + ".meta.json"); }

void print_progress(const std::string& line) { std::cout << line << std::endl; }

std::vector<fs::path> csv_files(const fs::path& p) {
    if (fs::is_regular_file(p)) return {p};
    if (!fs::is_directory(p)) throw std::invalid_argument("no such file or directory: " + p.string());
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(p))
        if (e.is_regular_file() && e.path().extension() == ".csv") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    if (out.empty()) throw std::invalid_argument("no CSV files in " + p.string());
    return out;
}

/// A dataset directory is either `series/` + `labels.csv` or a flat set of CSVs.
fs::path series_dir(const fs::path& dir) { return fs::is_directory(dir / "series") ? dir / "series" : dir; }

PoLVocab vocab_from(const Config& cfg, Direction d) { return ModelConfig::from_config(cfg, d).vocab; }

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw std::invalid_argument("not a number in list: '" + item + "'");
        }
    }
    return out;
}

std::string point_name(double v) {
    std::ostringstream ss;
    ss << v;
    return ss.str();
}

json report_row(const EvalReport& r) {
    return {{"acc", r.acc}, {"edit", r.edit}, {"f1", r.f1}, {"f1_macro", r.f1_macro}, {"n_objects", r.n_objects}};
}

void write_predictions(std::ostream& out, const std::string& id, const std::vector<int>& labels, const PoLVocab& vocab) {
    for (std::size_t t = 0; t < labels.size(); ++t) out << id << ',' << t << ',' << vocab.name(labels[t]) << '\n';
}

void plot_loss(const fs::path& path, const std::vector<std::pair<std::string, std::vector<double>>>& curves) {
    LinePlot p{"TRAINING LOSS", "ITERATION", "LOSS", {}};
    for (const auto& [name, c] : curves) {
        PlotSeries s{name, {}, {}};
        for (std::size_t i = 0; i < c.size(); ++i) {
            s.x.push_back(static_cast<double>(i + 1));
            s.y.push_back(c[i]);
        }
        p.series.push_back(std::move(s));
    }
    write_line_plot(p, path);
}

void plot_metrics(const fs::path& path, const std::string& title, const std::string& x_label, const std::vector<double>& xs,
                  const std::vector<EvalReport>& reports) {
    LinePlot p{title, x_label, "SCORE", {}};
    PlotSeries acc{"ACC", xs, {}}, edit{"EDIT", xs, {}}, f1{"F1@10", xs, {}};
    for (const auto& r : reports) {
        acc.y.push_back(r.acc);
        edit.y.push_back(r.edit);
        f1.y.push_back(r.f1.at(tau_key(0.10)));
    }
    p.series = {acc, edit, f1};
    write_line_plot(p, path);
}

RunDirectory open_run(const std::string& resume, const std::string& root, const std::string& kind) {
    return resume.empty() ? RunDirectory::create(root, kind) : RunDirectory::resume(resume);
}

// --- subcommands ------------------------------------------------------------

int cmd_synth(const Common& c, const std::string& out) {
    const Config cfg = c.layered({"data.seed"});
    const ExperimentConfig exp = ExperimentConfig::from_config(cfg);
    const PoLVocab ew = vocab_from(cfg, Direction::EW), ns = vocab_from(cfg, Direction::NS);
    const auto objects = objects_of(synth_generate(exp.synth, ew, ns));
    write_dataset(out, objects, ew, ns);
    write_json(fs::path(out) / "metadata.json", {{"metadata", metadata_block(cfg, c.seed)},
                                                  {"n_objects", objects.size()},
                                                  {"length", exp.synth.length}});
    std::cout << "wrote " << objects.size() << " objects to " << out << "\n";
    return 0;
}

int cmd_downsample(const Common& c, const std::string& in, const std::string& out, double mean_hours,
                   const std::string& histogram) {
    const Config cfg = c.layered({}, {{"sampling.mean_hours", point_name(mean_hours)}});
    SamplingProfile profile;
    if (!histogram.empty()) {
        profile = SamplingProfile::from_histogram_file(histogram, c.seed);
    } else {
        profile.mean_interval_hours = mean_hours;
        profile.seed = c.seed;
    }
    profile.validate();
    const auto files = csv_files(series_dir(in));
    fs::create_directories(fs::path(out) / "series");
    for (std::size_t i = 0; i < files.size(); ++i) {
        const OrbitSeries s = read_series_csv(files[i]);
        write_series_csv(fs::path(out) / "series" / files[i].filename(), downsample_forward_fill(s, profile, i));
    }
    if (fs::is_regular_file(fs::path(in) / "labels.csv"))
        fs::copy_file(fs::path(in) / "labels.csv", fs::path(out) / "labels.csv", fs::copy_options::overwrite_existing);
    write_json(fs::path(out) / "metadata.json",
               {{"metadata", metadata_block(cfg, c.seed)}, {"mean_interval_hours", profile.mean_interval_hours},
                {"n_series", files.size()}});
    std::cout << "downsampled " << files.size() << " series into " << out << "\n";
    return 0;
}

int cmd_train(const Common& c, const std::string& data, std::string labels, const std::string& direction,
              const std::string& out) {
    const Config cfg = c.layered({"train.seed"}, {{"experiment.direction", direction}});
    const ExperimentConfig exp = ExperimentConfig::from_config(cfg);
    if (labels.empty()) labels = (fs::path(data) / "labels.csv").string();
    const PoLVocab ew = exp.direction == Direction::EW ? exp.model.vocab : vocab_from(cfg, Direction::EW);
    const PoLVocab ns = exp.direction == Direction::NS ? exp.model.vocab : vocab_from(cfg, Direction::NS);
    DatasetSplit all;
    all.train = load_splid(series_dir(data), labels, ew, ns);
    std::cout << "training on " << all.train.size() << " objects (" << to_string(exp.direction) << ")\n";
    const ModelBundle bundle = train(all, exp.model, exp.train, print_progress);
    save_bundle(bundle, out);
    write_json(sidecar(out), {{"metadata", metadata_block(cfg, c.seed)},
                              {"iterations", bundle.meta.iterations},
                              {"seconds", bundle.meta.seconds},
                              {"loss_curve", bundle.meta.loss_curve}});
    if (!bundle.meta.loss_curve.empty()) plot_loss(fs::path(out + ".loss.png"), {{"TRAIN", bundle.meta.loss_curve}});
    std::cout << "saved " << out << "\n";
    return 0;
}

int cmd_infer(const Common& c, const std::string& bundle_path, const std::string& in, const std::string& out,
              const std::string& snapshots, int steps) {
    const Config cfg = c.layered({"infer.seed"});
    const ModelBundle bundle = load_bundle(bundle_path);
    const PoLVocab& vocab = bundle.model.vocab;
    std::ofstream pred(out);
    if (!pred) throw std::runtime_error("cannot write " + out);
    pred << "object_id,time_index,class_name\n";
    if (!snapshots.empty()) fs::create_directories(snapshots);
    const auto files = csv_files(series_dir(in));
    for (const auto& f : files) {
        const OrbitSeries s = read_series_csv(f, bundle.model.features);
        const InferResult r = infer(bundle, s, steps, c.seed, !snapshots.empty());
        write_predictions(pred, s.object_id, r.labels, vocab);
        if (!snapshots.empty()) {
            std::ofstream snap(fs::path(snapshots) / (s.object_id + ".csv"));
            snap << "step,time_index,class_name\n";
            for (std::size_t k = 0; k < r.snapshots.size(); ++k)
                for (std::size_t t = 0; t < r.snapshots[k].size(); ++t)
                    snap << r.snapshot_steps[k] << ',' << t << ',' << vocab.name(r.snapshots[k][t]) << '\n';
        }
        std::cout << s.object_id << ": " << rle_encode(r.labels).size() << " segments\n";
    }
    if (!pred) throw std::runtime_error("failed writing " + out);
    json meta = {{"metadata", metadata_block(cfg, c.seed)},
                 {"bundle", bundle_path},
                 {"direction", to_string(bundle.model.direction())},
                 {"classes", vocab.classes()},
                 {"n_objects", files.size()}};
    write_json(sidecar(out), meta);
    return 0;
}

/// Label rows per object for one direction; a missing direction column means `d`.
std::map<std::string, std::vector<Transition>> rows_by_object(const std::vector<fs::path>& files, Direction d) {
    std::map<std::string, std::vector<Transition>> out;
    for (const auto& f : files)
        for (auto& t : read_transitions(f, d))
            if (t.direction == d) out[t.object_id].push_back(std::move(t));
    return out;
}

int cmd_eval(const Common& c, const std::string& pred_path, const std::string& truth_path, const std::string& direction,
             const std::string& data, bool per_class, const std::string& granularity, const std::string& out) {
    const Config cfg = c.layered({}, {{"experiment.direction", direction}, {"eval.edit_granularity", granularity}});
    const ExperimentConfig exp = ExperimentConfig::from_config(cfg);
    const PoLVocab& vocab = exp.model.vocab;
    const auto pred_files = csv_files(pred_path);
    for (const auto& f : pred_files) {
        if (!fs::exists(sidecar(f))) continue;
        std::ifstream in(sidecar(f));
        const json meta = json::parse(in);
        if (meta.contains("direction") && meta["direction"] != to_string(exp.direction))
            throw std::invalid_argument(f.string() + " holds " + meta["direction"].get<std::string>() +
                                        " predictions, but --direction is " + to_string(exp.direction));
        if (meta.contains("classes") && meta["classes"].get<std::vector<std::string>>() != vocab.classes())
            throw std::invalid_argument(f.string() + ": predicted vocabulary does not match the " +
                                        to_string(exp.direction) + " vocabulary");
    }
    const auto pred_rows = rows_by_object(pred_files, exp.direction);
    const auto truth_rows = rows_by_object({fs::path(truth_path)}, exp.direction);

    std::map<std::string, int> lengths;
    if (!data.empty()) {
        for (const auto& f : csv_files(series_dir(data))) {
            const OrbitSeries s = read_series_csv(f);
            lengths[s.object_id] = s.length();
        }
    }
    auto length_of = [&](const std::string& id) {
        if (auto it = lengths.find(id); it != lengths.end()) return it->second;
        int last = 0;
        for (const auto* rows : {&pred_rows, &truth_rows})
            if (auto it = rows->find(id); it != rows->end())
                for (const auto& t : it->second) last = std::max(last, t.time_index);
        return last + 1;
    };
    std::map<std::string, std::vector<int>> truth, pred;
    for (const auto& [id, rows] : truth_rows)
        truth[id] = labels_from_transitions(id, exp.direction, rows, length_of(id), vocab).labels;
    for (const auto& [id, rows] : pred_rows)
        pred[id] = labels_from_transitions(id, exp.direction, rows, length_of(id), vocab).labels;

    std::vector<ObjectPrediction> items;
    try {
        items = pair_predictions(truth, pred);
    } catch (const MissingObjectsError& e) {
        std::cerr << "error: prediction and truth object sets differ\n";
        for (const auto& id : e.missing_predictions()) std::cerr << "  no prediction for " << id << "\n";
        for (const auto& id : e.missing_truth()) std::cerr << "  no ground truth for " << id << "\n";
        return 2;
    }
    const EvalReport report = evaluate(items, vocab, exp.edit_granularity);
    std::cout << report.to_table(per_class);
    json j = report.to_json();
    j["metadata"] = metadata_block(cfg, c.seed);
    write_json(out, j);
    return 0;
}

int cmd_ablate(const Common& c, const std::vector<std::string>& variants, const std::string& root,
               const std::string& resume) {
    const Config cfg = c.layered({"train.seed"});
    const ExperimentConfig exp = ExperimentConfig::from_config(cfg);
    std::vector<Variant> list;
    for (const auto& v : variants) list.push_back(parse_variant(v));
    const RunDirectory run = open_run(resume, root, "ablate");
    run.write_snapshot(cfg, c.seed);
    std::cout << "run directory " << run.path().string() << "\n";
    const DatasetSplit split = prepare_split(exp);

    json rows = json::object();
    std::vector<std::pair<std::string, std::vector<double>>> curves;
    for (Variant v : list) {
        const std::string name = to_string(v);
        EvalReport report;
        if (run.has_point(name)) {
            report = run.load_point(name);
            std::cout << name << ": resumed\n";
        } else {
            std::cout << name << ": training\n";
            const RunResult r = run_ablation(v, exp, split, print_progress);
            save_bundle(r.bundle, run.path() / (name + ".bin"));
            curves.emplace_back(name, r.bundle.meta.loss_curve);
            report = r.report;
            run.save_point(name, report);
        }
        std::cout << name << "\n" << report.to_table();
        rows[name] = report_row(report);
    }
    if (!curves.empty()) plot_loss(run.plots() / "loss.png", curves);
    run.write_metrics({{"metadata", metadata_block(cfg, c.seed)}, {"variants", rows}});
    return 0;
}

int cmd_robustness(const Common& c, const std::string& mean_hours, const std::string& histogram,
                   const std::string& bundle_path, const std::string& root, const std::string& resume) {
    const Config cfg = c.layered({"train.seed"});
    const ExperimentConfig exp = ExperimentConfig::from_config(cfg);
    std::vector<SamplingProfile> profiles(1);
    profiles[0].mean_interval_hours = 2.0;
    std::vector<std::string> names{"full_rate"};
    for (double h : parse_list(mean_hours)) {
        SamplingProfile p;
        p.mean_interval_hours = h;
        p.seed = c.seed;
        p.validate();
        profiles.push_back(p);
        names.push_back("mean_" + point_name(h) + "h");
    }
    if (!histogram.empty()) {
        profiles.push_back(SamplingProfile::from_histogram_file(histogram, c.seed));
        names.push_back("empirical");
    }
    const RunDirectory run = open_run(resume, root, "robustness");
    run.write_snapshot(cfg, c.seed);
    std::cout << "run directory " << run.path().string() << "\n";
    const DatasetSplit split = prepare_split(exp);

    ModelBundle bundle;
    const fs::path saved = run.path() / "full.bin";
    if (!bundle_path.empty()) {
        bundle = load_bundle(bundle_path);
    } else if (fs::exists(saved)) {
        bundle = load_bundle(saved);
        std::cout << "resumed bundle " << saved.string() << "\n";
    } else {
        bundle = train(split, exp.model, exp.train, print_progress);
        save_bundle(bundle, saved);
    }
    json rows = json::object();
    std::vector<EvalReport> reports;
    std::vector<double> xs;
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        EvalReport r;
        if (run.has_point(names[i])) {
            r = run.load_point(names[i]);
        } else {
            r = run_robustness(bundle, split, exp, {profiles[i]}).front();
            run.save_point(names[i], r);
        }
        std::cout << names[i] << "\n" << r.to_table();
        rows[names[i]] = report_row(r);
        if (profiles[i].distribution == IntervalDistribution::Lognormal) {
            xs.push_back(profiles[i].mean_interval_hours);
            reports.push_back(r);
        }
    }
    plot_metrics(run.plots() / "robustness.png", "SAMPLING RATE ROBUSTNESS", "MEAN INTERVAL (H)", xs, reports);
    run.write_metrics({{"metadata", metadata_block(cfg, c.seed)}, {"profiles", rows}});
    return 0;
}

int cmd_sweep(const Common& c, const std::string& axis_name, const std::string& values_text, const std::string& root,
              const std::string& resume) {
    const Config cfg = c.layered({"train.seed"});
    const ExperimentConfig base = ExperimentConfig::from_config(cfg);
    const SweepAxis axis = parse_sweep_axis(axis_name);
    const std::vector<double> values = parse_list(values_text);
    validate_sweep_values(axis, values);
    const RunDirectory run = open_run(resume, root, "sweep_" + axis_name);
    run.write_snapshot(cfg, c.seed);
    std::cout << "run directory " << run.path().string() << "\n";

    json rows = json::object();
    std::vector<EvalReport> reports;
    for (double v : values) {
        const std::string name = point_name(v);
        EvalReport r;
        if (run.has_point(name)) {
            r = run.load_point(name);
            std::cout << axis_name << "=" << name << ": resumed\n";
        } else {
            std::cout << axis_name << "=" << name << ": training\n";
            const ExperimentConfig exp = sweep_point(base, axis, v);
            const RunResult res = run_ablation(Variant::Full, exp, prepare_split(exp), print_progress);
            save_bundle(res.bundle, run.path() / (axis_name + "_" + name + ".bin"));
            r = res.report;
            run.save_point(name, r);
        }
        std::cout << r.to_table();
        rows[name] = report_row(r);
        reports.push_back(r);
    }
    std::string label = axis_name;
    std::transform(label.begin(), label.end(), label.begin(), [](unsigned char ch) { return std::toupper(ch); });
    std::replace(label.begin(), label.end(), '_', ' ');
    plot_metrics(run.plots() / ("sweep_" + axis_name + ".png"), "SENSITIVITY", label, values, reports);
    run.write_metrics({{"metadata", metadata_block(cfg, c.seed)}, {"axis", axis_name}, {"points", rows}});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pattern-of-life segmentation of satellite positional series"};
    app.set_version_flag("--version", version_string());
    app.require_subcommand(1);

    Common common;
    std::string out, in, data, labels, direction = "EW", bundle, snapshots, pred, truth, granularity = "segments";
    std::string histogram, resume, root = "runs", axis, values, mean_list = "13.7";
    std::vector<std::string> variants;
    double mean_hours = 13.7;
    int steps = 0;
    bool per_class = false;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    common.attach(synth);
    synth->add_option("--out", out, "Output directory")->required();

    auto* down = app.add_subcommand("downsample", "Degrade a dataset to a lower sampling rate");
    common.attach(down);
    down->add_option("--in", in, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    down->add_option("--out", out, "Output directory")->required();
    down->add_option("--mean-hours,--downsample-mean-hours", mean_hours, "Mean observation interval in hours");
    down->add_option("--histogram", histogram, "File of observed intervals (hours), one per line")
        ->check(CLI::ExistingFile);

    auto* tr = app.add_subcommand("train", "Train a model bundle");
    common.attach(tr);
    tr->add_option("--data,--data-dir", data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    tr->add_option("--labels", labels, "Label transition file (default DATA/labels.csv)")->check(CLI::ExistingFile);
    tr->add_option("--direction", direction, "EW or NS")->check(CLI::IsMember({"EW", "NS"}));
    tr->add_option("--out", out, "Bundle file")->required();

    auto* inf = app.add_subcommand("infer", "Label series with a trained bundle");
    common.attach(inf);
    inf->add_option("--bundle", bundle, "Bundle file")->required()->check(CLI::ExistingFile);
    inf->add_option("--in", in, "Series CSV or directory of CSVs")->required()->check(CLI::ExistingPath);
    inf->add_option("--out", out, "Prediction CSV")->required();
    inf->add_option("--snapshots", snapshots, "Directory for intermediate denoising snapshots");
    inf->add_option("--steps", steps, "Sampling steps (default: the bundle's setting)");

    auto* ev = app.add_subcommand("eval", "Score predictions against ground truth");
    common.attach(ev);
    ev->add_option("--pred", pred, "Prediction CSV or directory")->required()->check(CLI::ExistingPath);
    ev->add_option("--truth", truth, "Label transition file")->required()->check(CLI::ExistingFile);
    ev->add_option("--direction", direction, "EW or NS")->check(CLI::IsMember({"EW", "NS"}));
    ev->add_option("--data", data, "Dataset directory giving series lengths")->check(CLI::ExistingDirectory);
    ev->add_flag("--per-class", per_class, "Print per-class precision and recall");
    ev->add_option("--edit-granularity", granularity, "segments or frames")
        ->check(CLI::IsMember({"segments", "frames"}));
    ev->add_option("--out", out, "Report JSON")->required();

    auto* abl = app.add_subcommand("ablate", "Train and evaluate model variants");
    common.attach(abl);
    abl->add_option("--variant", variants, "full, no_decoder, no_geodetic, no_sloss or no_mask (repeatable)")
        ->required()
        ->delimiter(',');
    abl->add_option("--out", root, "Root for run directories");
    abl->add_option("--resume", resume, "Continue an existing run directory")->check(CLI::ExistingDirectory);

    auto* rob = app.add_subcommand("robustness", "Evaluate at reduced sampling rates");
    common.attach(rob);
    rob->add_option("--mean-hours", mean_list, "Comma-separated mean intervals in hours");
    rob->add_option("--histogram", histogram, "File of observed intervals (hours)")->check(CLI::ExistingFile);
    rob->add_option("--bundle", bundle, "Evaluate this bundle instead of training")->check(CLI::ExistingFile);
    rob->add_option("--out", root, "Root for run directories");
    rob->add_option("--resume", resume, "Continue an existing run directory")->check(CLI::ExistingDirectory);

    auto* sw = app.add_subcommand("sweep", "One-parameter sensitivity sweep");
    common.attach(sw);
    sw->add_option("--axis", axis, "diffusion_steps, sequence_length or noise_level")->required();
    sw->add_option("--values", values, "Comma-separated values")->required();
    sw->add_option("--out", root, "Root for run directories");
    sw->add_option("--resume", resume, "Continue an existing run directory")->check(CLI::ExistingDirectory);

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth(common, out);
        if (down->parsed()) return cmd_downsample(common, in, out, mean_hours, histogram);
        if (tr->parsed()) return cmd_train(common, data, labels, direction, out);
        if (inf->parsed()) return cmd_infer(common, bundle, in, out, snapshots, steps);
        if (ev->parsed()) return cmd_eval(common, pred, truth, direction, data, per_class, granularity, out);
        if (abl->parsed()) return cmd_ablate(common, variants, root, resume);
        if (rob->parsed()) return cmd_robustness(common, mean_list, histogram, bundle, root, resume);
        if (sw->parsed()) return cmd_sweep(common, axis, values, root, resume);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
