#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "polseg/domain.hpp"

namespace polseg {

/// Percentage of timesteps where prediction equals truth.
double accuracy(const std::vector<int>& truth, const std::vector<int>& pred);

/// Levenshtein distance with unit insert/delete/substitute costs.
int levenshtein(const std::vector<int>& a, const std::vector<int>& b);

enum class EditGranularity { Segments, Frames };

/// (1 - e / max(|Y|, |Y'|)) * 100 over run-length segment strings (default)
/// or raw frames.
double edit_score(const std::vector<int>& truth, const std::vector<int>& pred,
                  EditGranularity granularity = EditGranularity::Segments);

struct SegmentCounts {
    long tp = 0;
    long fp = 0;
    long fn = 0;

    SegmentCounts& operator+=(const SegmentCounts& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        return *this;
    }
    double precision() const;  // percent
    double recall() const;     // percent
    double f1() const;         // percent, 0 when precision and recall are both 0
};

struct SegmentalF1 {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    SegmentCounts counts;
    std::map<int, SegmentCounts> per_class;  // keyed by class index
};

/// Each predicted segment (in order) is matched to its best-IoU unmatched
/// ground-truth segment of the same class; TP when IoU >= tau.
SegmentalF1 segmental_f1(const std::vector<int>& truth, const std::vector<int>& pred, double tau);
/// Same matching on explicit segment lists, which need not tile a common range.
SegmentalF1 segmental_f1(const SegmentList& truth, const SegmentList& pred, double tau);

inline const std::vector<double> kDefaultF1Thresholds{0.10, 0.25, 0.50};

struct ClassStats {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    long tp = 0, fp = 0, fn = 0;
};

struct EvalReport {
    std::string direction;
    int n_objects = 0;
    double acc = 0;
    double edit = 0;
    std::map<std::string, double> f1;        // "0.10" -> pooled (micro) F1 percent
    std::map<std::string, double> f1_macro;  // mean of per-class F1 over classes present
    /// tau key -> class name -> stats
    std::map<std::string, std::map<std::string, ClassStats>> per_class;
    std::string edit_granularity = "segments";

    nlohmann::json to_json() const;
    static EvalReport from_json(const nlohmann::json& j);
    /// Aligned-column text table.
    std::string to_table(bool per_class = false) const;
};

std::string tau_key(double tau);

struct ObjectPrediction {
    std::string object_id;
    std::vector<int> truth;
    std::vector<int> pred;
};

/// Acc and Edit are averaged over objects; F1 counts are pooled over objects
/// and classes before computing P/R/F1.
EvalReport evaluate(const std::vector<ObjectPrediction>& items, const PoLVocab& vocab,
                    EditGranularity granularity = EditGranularity::Segments,
                    const std::vector<double>& thresholds = kDefaultF1Thresholds);

/// Pairs truth and predictions by object id. Throws MissingObjectsError when
/// the id sets differ.
std::vector<ObjectPrediction> pair_predictions(const std::map<std::string, std::vector<int>>& truth,
                                               const std::map<std::string, std::vector<int>>& pred);

class MissingObjectsError : public std::runtime_error {
public:
    MissingObjectsError(std::vector<std::string> missing_pred, std::vector<std::string> missing_truth);
    const std::vector<std::string>& missing_predictions() const { return missing_pred_; }
    const std::vector<std::string>& missing_truth() const { return missing_truth_; }

private:
    std::vector<std::string> missing_pred_;
    std::vector<std::string> missing_truth_;
};

}  // namespace polseg
