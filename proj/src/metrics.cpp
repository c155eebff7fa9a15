#include "polseg/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace polseg {

double accuracy(const std::vector<int>& truth, const std::vector<int>& pred) {
    if (truth.size() != pred.size())
        throw std::invalid_argument("accuracy: length mismatch (" + std::to_string(truth.size()) + " vs " +
                                    std::to_string(pred.size()) + ")");
    if (truth.empty()) throw std::invalid_argument("accuracy: empty sequences");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) correct += truth[i] == pred[i];
    return 100.0 * static_cast<double>(correct) / static_cast<double>(truth.size());
}

int levenshtein(const std::vector<int>& a, const std::vector<int>& b) {
    // Single-row DP over b.
    std::vector<int> row(b.size() + 1);
    std::iota(row.begin(), row.end(), 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        int diag = row[0];
        row[0] = static_cast<int>(i);
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const int up = row[j];
            const int sub = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, sub});
            diag = up;
        }
    }
    return row[b.size()];
}

namespace {

std::vector<int> segment_string(const std::vector<int>& labels) {
    std::vector<int> out;
    for (const Segment& s : rle_encode(labels)) out.push_back(s.label);
    return out;
}

}  // namespace

double edit_score(const std::vector<int>& truth, const std::vector<int>& pred, EditGranularity granularity) {
    if (truth.empty() || pred.empty()) throw std::invalid_argument("edit_score: empty input");
    std::vector<int> a = granularity == EditGranularity::Segments ? segment_string(truth) : truth;
    std::vector<int> b = granularity == EditGranularity::Segments ? segment_string(pred) : pred;
    const int e = levenshtein(a, b);
    return (1.0 - static_cast<double>(e) / static_cast<double>(std::max(a.size(), b.size()))) * 100.0;
}

double SegmentCounts::precision() const { return tp + fp == 0 ? 0.0 : 100.0 * tp / static_cast<double>(tp + fp); }
double SegmentCounts::recall() const { return tp + fn == 0 ? 0.0 : 100.0 * tp / static_cast<double>(tp + fn); }
double SegmentCounts::f1() const {
    const double p = precision(), r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

SegmentalF1 segmental_f1(const std::vector<int>& truth, const std::vector<int>& pred, double tau) {
    if (truth.size() != pred.size()) throw std::invalid_argument("segmental_f1: length mismatch");
    return segmental_f1(rle_encode(truth), rle_encode(pred), tau);
}

SegmentalF1 segmental_f1(const SegmentList& gt, const SegmentList& pr, double tau) {
    if (!(tau > 0.0 && tau < 1.0 + 1e-12)) throw std::invalid_argument("segmental_f1: tau must be in (0,1]");
    std::vector<bool> used(gt.size(), false);
    SegmentalF1 out;
    for (const Segment& p : pr) {
        double best = -1.0;
        std::size_t best_j = gt.size();
        for (std::size_t j = 0; j < gt.size(); ++j) {
            if (used[j] || gt[j].label != p.label) continue;
            const int inter = std::max(0, std::min(p.end, gt[j].end) - std::max(p.start, gt[j].start));
            const int uni = std::max(p.end, gt[j].end) - std::min(p.start, gt[j].start);
            const double iou = static_cast<double>(inter) / static_cast<double>(uni);
            if (iou > best) {
                best = iou;
                best_j = j;
            }
        }
        SegmentCounts& cls = out.per_class[p.label];
        if (best_j < gt.size() && best >= tau) {
            used[best_j] = true;
            ++out.counts.tp;
            ++cls.tp;
        } else {
            ++out.counts.fp;
            ++cls.fp;
        }
    }
    for (std::size_t j = 0; j < gt.size(); ++j) {
        if (used[j]) continue;
        ++out.counts.fn;
        ++out.per_class[gt[j].label].fn;
    }
    out.precision = out.counts.precision();
    out.recall = out.counts.recall();
    out.f1 = out.counts.f1();
    return out;
}

std::string tau_key(double tau) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.2f", tau);
    return buf;
}

MissingObjectsError::MissingObjectsError(std::vector<std::string> missing_pred, std::vector<std::string> missing_truth)
    : std::runtime_error([&] {
          std::string msg = "prediction and truth object sets differ;";
          if (!missing_pred.empty()) {
              msg += " missing predictions:";
              for (const auto& id : missing_pred) msg += " " + id;
              msg += ";";
          }
          if (!missing_truth.empty()) {
              msg += " missing truth:";
              for (const auto& id : missing_truth) msg += " " + id;
          }
          return msg;
      }()),
      missing_pred_(std::move(missing_pred)),
      missing_truth_(std::move(missing_truth)) {}

std::vector<ObjectPrediction> pair_predictions(const std::map<std::string, std::vector<int>>& truth,
                                               const std::map<std::string, std::vector<int>>& pred) {
    std::vector<std::string> missing_pred, missing_truth;
    for (const auto& [id, _] : truth)
        if (!pred.count(id)) missing_pred.push_back(id);
    for (const auto& [id, _] : pred)
        if (!truth.count(id)) missing_truth.push_back(id);
    if (!missing_pred.empty() || !missing_truth.empty())
        throw MissingObjectsError(std::move(missing_pred), std::move(missing_truth));
    std::vector<ObjectPrediction> out;
    for (const auto& [id, y] : truth) out.push_back({id, y, pred.at(id)});
    return out;
}

EvalReport evaluate(const std::vector<ObjectPrediction>& items, const PoLVocab& vocab, EditGranularity granularity,
                    const std::vector<double>& thresholds) {
    if (items.empty()) throw std::invalid_argument("evaluate: no objects");
    EvalReport r;
    r.direction = to_string(vocab.direction());
    r.n_objects = static_cast<int>(items.size());
    r.edit_granularity = granularity == EditGranularity::Segments ? "segments" : "frames";
    double acc_sum = 0.0, edit_sum = 0.0;
    for (const auto& it : items) {
        acc_sum += accuracy(it.truth, it.pred);
        edit_sum += edit_score(it.truth, it.pred, granularity);
    }
    r.acc = acc_sum / static_cast<double>(items.size());
    r.edit = edit_sum / static_cast<double>(items.size());

    for (double tau : thresholds) {
        SegmentCounts pooled;
        std::map<int, SegmentCounts> cls;
        for (const auto& it : items) {
            SegmentalF1 s = segmental_f1(it.truth, it.pred, tau);
            pooled += s.counts;
            for (const auto& [c, counts] : s.per_class) cls[c] += counts;
        }
        const std::string key = tau_key(tau);
        r.f1[key] = pooled.f1();
        double macro = 0.0;
        for (const auto& [c, counts] : cls) {
            ClassStats st{counts.precision(), counts.recall(), counts.f1(), counts.tp, counts.fp, counts.fn};
            r.per_class[key][vocab.name(c)] = st;
            macro += st.f1;
        }
        r.f1_macro[key] = cls.empty() ? 0.0 : macro / static_cast<double>(cls.size());
    }
    return r;
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json j;
    j["direction"] = direction;
    j["n_objects"] = n_objects;
    j["acc"] = acc;
    j["edit"] = edit;
    j["edit_granularity"] = edit_granularity;
    j["f1"] = f1;
    j["f1_macro"] = f1_macro;
    nlohmann::json pc = nlohmann::json::object();
    for (const auto& [tau, classes] : per_class)
        for (const auto& [name, st] : classes)
            pc[tau][name] = {{"precision", st.precision}, {"recall", st.recall}, {"f1", st.f1},
                             {"tp", st.tp},               {"fp", st.fp},         {"fn", st.fn}};
    j["per_class"] = pc;
    return j;
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
    EvalReport r;
    r.direction = j.at("direction").get<std::string>();
    r.n_objects = j.at("n_objects").get<int>();
    r.acc = j.at("acc").get<double>();
    r.edit = j.at("edit").get<double>();
    r.edit_granularity = j.value("edit_granularity", std::string("segments"));
    r.f1 = j.at("f1").get<std::map<std::string, double>>();
    r.f1_macro = j.value("f1_macro", std::map<std::string, double>{});
    if (j.contains("per_class"))
        for (const auto& [tau, classes] : j["per_class"].items())
            for (const auto& [name, st] : classes.items())
                r.per_class[tau][name] = {st.at("precision").get<double>(), st.at("recall").get<double>(),
                                          st.at("f1").get<double>(),        st.at("tp").get<long>(),
                                          st.at("fp").get<long>(),          st.at("fn").get<long>()};
    return r;
}

std::string EvalReport::to_table(bool show_per_class) const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    os << std::left << std::setw(6) << "Dir" << std::right << std::setw(8) << "Objects" << std::setw(9) << "Acc"
       << std::setw(9) << "Edit";
    for (const auto& [tau, _] : f1) os << std::setw(10) << ("F1@" + std::to_string(static_cast<int>(std::stod(tau) * 100 + 0.5)));
    os << "\n";
    os << std::left << std::setw(6) << direction << std::right << std::setw(8) << n_objects << std::setw(9) << acc
       << std::setw(9) << edit;
    for (const auto& [_, v] : f1) os << std::setw(10) << v;
    os << "\n";
    if (show_per_class) {
        for (const auto& [tau, classes] : per_class) {
            os << "\nper class @ tau=" << tau << "\n";
            os << std::left << std::setw(8) << "Class" << std::right << std::setw(11) << "Precision" << std::setw(9)
               << "Recall" << std::setw(9) << "F1" << std::setw(6) << "TP" << std::setw(6) << "FP" << std::setw(6)
               << "FN" << "\n";
            for (const auto& [name, st] : classes)
                os << std::left << std::setw(8) << name << std::right << std::setw(11) << st.precision << std::setw(9)
                   << st.recall << std::setw(9) << st.f1 << std::setw(6) << st.tp << std::setw(6) << st.fp
                   << std::setw(6) << st.fn << "\n";
        }
    }
    return os.str();
}

}  // namespace polseg
