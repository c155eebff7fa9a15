#include <algorithm>
#include <cmath>
#include <ctime>
#include <fstream>
#include <optional>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "polseg/data.hpp"

namespace polseg {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s, const std::string& where) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument(where + ": cannot parse number '" + s + "'");
    }
}

// Hours since 1970-01-01T00:00:00Z.
bool parse_iso_hours(const std::string& s, double& hours) {
    if (s.size() < 19 || s[4] != '-' || s[7] != '-') return false;
    std::tm tm{};
    std::istringstream ss(s);
    ss >> std::get_time(&tm, "%Y-%m-%dT%H:%M:%S");
    if (ss.fail()) {
        ss.clear();
        ss.str(s);
        ss >> std::get_time(&tm, "%Y-%m-%d %H:%M:%S");
        if (ss.fail()) return false;
    }
    hours = static_cast<double>(timegm(&tm)) / 3600.0;
    return true;
}

double parse_timestamp(const std::string& s, const std::string& where) {
    double h = 0.0;
    if (parse_iso_hours(s, h)) return h;
    return parse_double(s, where);
}

}  // namespace

// --- normalization ----------------------------------------------------------

void unwrap_degrees(Mat& values, int column) {
    if (values.rows() == 0) return;
    double offset = 0.0;
    double prev = values(0, column);
    for (Eigen::Index t = 1; t < values.rows(); ++t) {
        const double raw = values(t, column);
        const double d = raw - prev;
        if (std::abs(d) > 180.0) offset -= 360.0 * std::round(d / 360.0);
        prev = raw;
        values(t, column) = raw + offset;
    }
}

namespace {

Mat unwrapped_values(const OrbitSeries& s, const std::vector<bool>& circular) {
    Mat v = s.values;
    for (int f = 0; f < s.dims(); ++f)
        if (circular[static_cast<std::size_t>(f)]) unwrap_degrees(v, f);
    return v;
}

}  // namespace

nlohmann::json NormStats::to_json() const {
    return {{"feature_names", feature_names}, {"mean", mean}, {"scale", scale}, {"circular", circular}};
}

NormStats NormStats::from_json(const nlohmann::json& j) {
    NormStats s;
    s.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    s.mean = j.at("mean").get<std::vector<double>>();
    s.scale = j.at("scale").get<std::vector<double>>();
    s.circular = j.at("circular").get<std::vector<bool>>();
    return s;
}

NormStats fit_normalizer(const std::vector<OrbitSeries>& train, const WarningSink& warn) {
    if (train.empty()) throw std::invalid_argument("normalize: empty training set");
    NormStats st;
    st.feature_names = train.front().feature_names;
    const int d = static_cast<int>(st.feature_names.size());
    for (const auto& name : st.feature_names) st.circular.push_back(is_circular_feature(name));
    std::vector<double> sum(static_cast<std::size_t>(d), 0.0);
    double n = 0.0;
    std::vector<Mat> unwrapped;
    unwrapped.reserve(train.size());
    for (const auto& s : train) {
        if (s.feature_names != st.feature_names)
            throw std::invalid_argument("normalize: series " + s.object_id + " has a different feature set");
        unwrapped.push_back(unwrapped_values(s, st.circular));
        for (int f = 0; f < d; ++f) sum[static_cast<std::size_t>(f)] += unwrapped.back().col(f).sum();
        n += static_cast<double>(s.length());
    }
    st.mean.resize(static_cast<std::size_t>(d));
    st.scale.resize(static_cast<std::size_t>(d));
    for (int f = 0; f < d; ++f) st.mean[static_cast<std::size_t>(f)] = sum[static_cast<std::size_t>(f)] / n;
    for (int f = 0; f < d; ++f) {
        const auto fu = static_cast<std::size_t>(f);
        double ss = 0.0;
        for (const auto& v : unwrapped) ss += (v.col(f).array() - st.mean[fu]).square().sum();
        const double var = ss / n;
        // Relative threshold: a constant column can pick up rounding noise around a large mean.
        if (var <= 1e-24 * std::max(1.0, st.mean[fu] * st.mean[fu])) {
            st.scale[fu] = 1.0;
            if (warn) warn("feature '" + st.feature_names[fu] + "' has zero variance; centring only");
        } else {
            st.scale[fu] = std::sqrt(var);
        }
    }
    return st;
}

OrbitSeries apply_normalizer(const OrbitSeries& series, const NormStats& stats) {
    if (series.feature_names != stats.feature_names)
        throw std::invalid_argument(series.object_id + ": features do not match the normalizer");
    OrbitSeries out = series;
    out.values = unwrapped_values(series, stats.circular);
    for (int f = 0; f < series.dims(); ++f) {
        const auto fu = static_cast<std::size_t>(f);
        out.values.col(f) = (out.values.col(f).array() - stats.mean[fu]) / stats.scale[fu];
    }
    return out;
}

std::pair<std::vector<OrbitSeries>, NormStats> normalize(const std::vector<OrbitSeries>& train,
                                                         const std::vector<OrbitSeries>& apply_to,
                                                         const WarningSink& warn) {
    NormStats st = fit_normalizer(train, warn);
    std::vector<OrbitSeries> out;
    out.reserve(apply_to.size());
    for (const auto& s : apply_to) out.push_back(apply_normalizer(s, st));
    return {std::move(out), std::move(st)};
}

OrbitSeries select_features(const OrbitSeries& series, const std::vector<std::string>& names) {
    std::vector<std::string> missing;
    std::vector<int> cols;
    for (const auto& n : names) {
        const int c = series.feature_index(n);
        if (c < 0) missing.push_back(n);
        cols.push_back(c);
    }
    if (!missing.empty()) {
        std::string msg = series.object_id + ": missing feature(s):";
        for (const auto& m : missing) msg += " " + m;
        throw std::invalid_argument(msg);
    }
    OrbitSeries out;
    out.object_id = series.object_id;
    out.timestamps = series.timestamps;
    out.feature_names = names;
    out.values.resize(series.length(), static_cast<Eigen::Index>(names.size()));
    for (std::size_t i = 0; i < cols.size(); ++i) out.values.col(static_cast<Eigen::Index>(i)) = series.values.col(cols[i]);
    return out;
}

// --- splitting --------------------------------------------------------------

DatasetSplit split(const std::vector<LabeledObject>& dataset, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("split: ratio must be in (0,1)");
    const int n = static_cast<int>(dataset.size());
    if (n < 2) throw std::invalid_argument("split: need at least 2 objects");
    std::set<std::string> ids;
    for (const auto& o : dataset)
        if (!ids.insert(o.series.object_id).second)
            throw std::invalid_argument("split: duplicate object id " + o.series.object_id);
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    // Fisher-Yates with our own index draws so the permutation does not depend on the library's shuffle.
    for (int i = n - 1; i > 0; --i) std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(rng.uniform_int(0, i))]);
    const int n_train = std::clamp(static_cast<int>(std::lround(ratio * n)), 1, n - 1);
    DatasetSplit out;
    out.split_seed = seed;
    for (int i = 0; i < n; ++i)
        (i < n_train ? out.train : out.test).push_back(dataset[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
    return out;
}

// --- files ------------------------------------------------------------------

FeatureMap read_feature_map(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open feature map " + path.string());
    FeatureMap m;
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("feature map line without '=': " + line);
        m[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return m;
}

std::vector<Transition> read_transitions(const fs::path& path, std::optional<Direction> fallback) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open label file " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("label file is empty: " + path.string());
    const auto header = split_csv(line);
    auto find = [&](const std::string& name) { return std::find(header.begin(), header.end(), name); };
    auto col = [&](const std::string& name) {
        auto it = find(name);
        if (it == header.end()) throw std::invalid_argument("label file missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto c_obj = col("object_id"), c_t = col("time_index"), c_cls = col("class_name");
    const bool has_dir = find("direction") != header.end() || !fallback;
    const auto c_dir = has_dir ? col("direction") : 0;
    std::vector<Transition> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split_csv(line);
        const std::string where = path.string() + ":" + std::to_string(lineno);
        if (cells.size() < header.size()) throw std::invalid_argument(where + ": too few columns");
        const double t = parse_double(cells[c_t], where);
        if (t != std::floor(t)) throw std::invalid_argument(where + ": time_index " + cells[c_t] + " is off-grid");
        rows.push_back({cells[c_obj], static_cast<int>(t), has_dir ? parse_direction(cells[c_dir]) : *fallback, cells[c_cls]});
    }
    return rows;
}

void write_transitions(const fs::path& path, const std::vector<Transition>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "object_id,time_index,direction,class_name\n";
    for (const auto& r : rows) out << r.object_id << ',' << r.time_index << ',' << to_string(r.direction) << ',' << r.class_name << '\n';
}

std::vector<Transition> to_transitions(const LabelSeq& labels, const PoLVocab& vocab) {
    std::vector<Transition> out;
    for (const Segment& s : rle_encode(labels))
        out.push_back({labels.object_id, s.start, labels.direction, vocab.name(s.label)});
    return out;
}

LabelSeq labels_from_transitions(const std::string& object_id, Direction direction, std::vector<Transition> rows,
                                 int length, const PoLVocab& vocab) {
    if (rows.empty())
        throw std::invalid_argument(object_id + ": no " + to_string(direction) + " transitions");
    std::stable_sort(rows.begin(), rows.end(), [](const Transition& a, const Transition& b) { return a.time_index < b.time_index; });
    for (const auto& r : rows)
        if (r.time_index < 0 || r.time_index >= length)
            throw std::invalid_argument(object_id + ": transition at time_index " + std::to_string(r.time_index) +
                                        " is off-grid (series has " + std::to_string(length) + " steps)");
    if (rows.front().time_index != 0)
        throw std::invalid_argument(object_id + ": first " + to_string(direction) +
                                    " transition must be at time_index 0");
    LabelSeq out{object_id, direction, std::vector<int>(static_cast<std::size_t>(length))};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const int cls = vocab.index_of(rows[i].class_name);
        const int end = i + 1 < rows.size() ? rows[i + 1].time_index : length;
        std::fill(out.labels.begin() + rows[i].time_index, out.labels.begin() + end, cls);
    }
    return out;
}

OrbitSeries read_series_csv(const fs::path& path, const std::vector<std::string>& features, const FeatureMap& map) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument(path.string() + ": empty file (header row required)");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);  // UTF-8 BOM
    const auto header = split_csv(line);
    if (header.empty() || header.front() != "timestamp")
        throw std::invalid_argument(path.string() + ": first column must be 'timestamp'");

    std::vector<std::string> wanted = features;
    if (wanted.empty()) wanted.assign(header.begin() + 1, header.end());
    std::vector<std::size_t> cols;
    std::vector<std::string> missing;
    for (const auto& name : wanted) {
        auto m = map.find(name);
        const std::string column = m == map.end() ? name : m->second;
        auto it = std::find(header.begin(), header.end(), column);
        if (it == header.end()) missing.push_back(name);
        else cols.push_back(static_cast<std::size_t>(it - header.begin()));
    }
    if (!missing.empty()) {
        std::string msg = path.string() + ": missing feature(s):";
        for (const auto& m : missing) msg += " " + m;
        throw std::invalid_argument(msg);
    }

    OrbitSeries s;
    s.object_id = path.stem().string();
    s.feature_names = wanted;
    std::vector<std::vector<double>> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split_csv(line);
        const std::string where = path.string() + ":" + std::to_string(lineno);
        if (cells.size() < header.size()) throw std::invalid_argument(where + ": too few columns");
        s.timestamps.push_back(parse_timestamp(cells[0], where));
        std::vector<double> row;
        for (auto c : cols) {
            const double v = parse_double(cells[c], where);
            if (!std::isfinite(v)) throw std::invalid_argument(where + ": non-finite value (resolve missing data first)");
            row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    s.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(wanted.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c) s.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    s.validate();
    return s;
}

void write_series_csv(const fs::path& path, const OrbitSeries& series) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "timestamp";
    for (const auto& n : series.feature_names) out << ',' << n;
    out << '\n' << std::setprecision(17);
    for (int t = 0; t < series.length(); ++t) {
        out << series.timestamps[static_cast<std::size_t>(t)];
        for (int f = 0; f < series.dims(); ++f) out << ',' << series.values(t, f);
        out << '\n';
    }
}

std::vector<LabeledObject> load_splid(const fs::path& data_dir, const fs::path& label_file, const PoLVocab& ew_vocab,
                                      const PoLVocab& ns_vocab, const FeatureMap& map) {
    if (!fs::is_directory(data_dir)) throw std::invalid_argument("not a directory: " + data_dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(data_dir))
        if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::invalid_argument("no positional CSV files in " + data_dir.string());

    std::map<std::string, std::map<Direction, std::vector<Transition>>> by_object;
    for (auto& t : read_transitions(label_file)) by_object[t.object_id][t.direction].push_back(t);

    std::vector<LabeledObject> out;
    for (const auto& f : files) {
        LabeledObject obj;
        obj.series = read_series_csv(f, canonical_features(), map);
        for (std::size_t i = 1; i < obj.series.timestamps.size(); ++i)
            if (std::abs(obj.series.timestamps[i] - obj.series.timestamps[i - 1] - kGridHours) > 1e-6)
                throw std::invalid_argument(f.string() + ": rows are not on a uniform 2 h grid (row " + std::to_string(i) + ")");
        const std::string& id = obj.series.object_id;
        auto it = by_object.find(id);
        if (it == by_object.end()) throw std::invalid_argument(id + ": object has no transitions in the label file");
        obj.ew = labels_from_transitions(id, Direction::EW, it->second[Direction::EW], obj.series.length(), ew_vocab);
        obj.ns = labels_from_transitions(id, Direction::NS, it->second[Direction::NS], obj.series.length(), ns_vocab);
        out.push_back(std::move(obj));
    }
    return out;
}

void write_dataset(const fs::path& dir, const std::vector<LabeledObject>& objects, const PoLVocab& ew_vocab,
                   const PoLVocab& ns_vocab) {
    fs::create_directories(dir / "series");
    std::vector<Transition> rows;
    for (const auto& o : objects) {
        write_series_csv(dir / "series" / (o.series.object_id + ".csv"), o.series);
        for (auto& t : to_transitions(o.ew, ew_vocab)) rows.push_back(std::move(t));
        for (auto& t : to_transitions(o.ns, ns_vocab)) rows.push_back(std::move(t));
    }
    write_transitions(dir / "labels.csv", rows);
}

}  // namespace polseg
