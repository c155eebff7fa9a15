#include "polseg/domain.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace polseg {

std::string to_string(Direction d) { return d == Direction::EW ? "EW" : "NS"; }

Direction parse_direction(std::string_view s) {
    if (s == "EW" || s == "ew") return Direction::EW;
    if (s == "NS" || s == "ns") return Direction::NS;
    throw std::invalid_argument("unknown direction '" + std::string(s) + "' (expected EW or NS)");
}

PoLVocab::PoLVocab(Direction direction, std::vector<std::string> classes)
    : direction_(direction), classes_(std::move(classes)) {
    if (classes_.size() < 2) throw std::invalid_argument("vocabulary needs at least 2 classes");
    std::set<std::string> seen;
    for (const auto& c : classes_) {
        if (c.empty()) throw std::invalid_argument("empty class name in vocabulary");
        if (!seen.insert(c).second) throw std::invalid_argument("duplicate class name '" + c + "'");
    }
}

PoLVocab PoLVocab::default_for(Direction direction) {
    if (direction == Direction::EW) return PoLVocab(direction, {"ID", "AD", "EK", "CK", "HK"});
    return PoLVocab(direction, {"ID", "AD", "CK", "EK"});
}

const std::string& PoLVocab::name(int index) const {
    if (index < 0 || index >= size())
        throw std::out_of_range("class index " + std::to_string(index) + " outside vocabulary");
    return classes_[static_cast<std::size_t>(index)];
}

int PoLVocab::index_of(std::string_view name) const {
    auto it = std::find(classes_.begin(), classes_.end(), name);
    if (it == classes_.end())
        throw std::invalid_argument("class '" + std::string(name) + "' not in " + to_string(direction_) +
                                    " vocabulary");
    return static_cast<int>(it - classes_.begin());
}

bool PoLVocab::contains(std::string_view name) const {
    return std::find(classes_.begin(), classes_.end(), name) != classes_.end();
}

int OrbitSeries::feature_index(std::string_view name) const {
    auto it = std::find(feature_names.begin(), feature_names.end(), name);
    return it == feature_names.end() ? -1 : static_cast<int>(it - feature_names.begin());
}

void OrbitSeries::validate() const {
    if (static_cast<Eigen::Index>(timestamps.size()) != values.rows())
        throw std::invalid_argument(object_id + ": timestamp count does not match row count");
    if (static_cast<Eigen::Index>(feature_names.size()) != values.cols())
        throw std::invalid_argument(object_id + ": feature name count does not match column count");
    for (std::size_t i = 1; i < timestamps.size(); ++i)
        if (!(timestamps[i] > timestamps[i - 1]))
            throw std::invalid_argument(object_id + ": timestamps not strictly increasing at row " +
                                        std::to_string(i));
    if (!values.allFinite()) throw std::invalid_argument(object_id + ": non-finite feature value");
}

void LabelSeq::validate(int num_classes) const {
    for (std::size_t t = 0; t < labels.size(); ++t)
        if (labels[t] < 0 || labels[t] >= num_classes)
            throw std::out_of_range(object_id + ": label " + std::to_string(labels[t]) + " at t=" +
                                    std::to_string(t) + " outside [0," + std::to_string(num_classes) + ")");
}

SegmentList rle_encode(const std::vector<int>& labels) {
    if (labels.empty()) throw std::invalid_argument("rle_encode: empty label sequence");
    SegmentList out;
    int start = 0;
    const int n = static_cast<int>(labels.size());
    for (int t = 1; t <= n; ++t) {
        if (t == n || labels[static_cast<std::size_t>(t)] != labels[static_cast<std::size_t>(start)]) {
            out.push_back({labels[static_cast<std::size_t>(start)], start, t});
            start = t;
        }
    }
    return out;
}

SegmentList rle_encode(const LabelSeq& labels) { return rle_encode(labels.labels); }

std::vector<int> rle_decode(const SegmentList& segments, int length) {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(std::max(length, 0)));
    int cursor = 0;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const Segment& s = segments[i];
        if (s.start > cursor)
            throw std::invalid_argument("rle_decode: gap [" + std::to_string(cursor) + "," +
                                        std::to_string(s.start) + ") before segment " + std::to_string(i));
        if (s.start < cursor)
            throw std::invalid_argument("rle_decode: segment " + std::to_string(i) + " overlaps at t=" +
                                        std::to_string(s.start));
        if (s.end <= s.start)
            throw std::invalid_argument("rle_decode: segment " + std::to_string(i) + " is empty");
        if (i > 0 && segments[i - 1].label == s.label)
            throw std::invalid_argument("rle_decode: segments " + std::to_string(i - 1) + " and " +
                                        std::to_string(i) + " share a label (non-maximal runs)");
        out.insert(out.end(), static_cast<std::size_t>(s.length()), s.label);
        cursor = s.end;
    }
    if (cursor != length)
        throw std::invalid_argument("rle_decode: segments cover [0," + std::to_string(cursor) +
                                    ") but length is " + std::to_string(length));
    return out;
}

Mat onehot(const std::vector<int>& labels, int num_classes) {
    Mat m = Mat::Zero(static_cast<Eigen::Index>(labels.size()), num_classes);
    for (std::size_t t = 0; t < labels.size(); ++t) {
        const int c = labels[t];
        if (c < 0 || c >= num_classes)
            throw std::out_of_range("onehot: label " + std::to_string(c) + " outside [0," +
                                    std::to_string(num_classes) + ")");
        m(static_cast<Eigen::Index>(t), c) = 1.0;
    }
    return m;
}

std::vector<int> argmax_rows(const Mat& m) {
    std::vector<int> out(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index t = 0; t < m.rows(); ++t) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < m.cols(); ++c)
            if (m(t, c) > m(t, best)) best = c;
        out[static_cast<std::size_t>(t)] = static_cast<int>(best);
    }
    return out;
}

}  // namespace polseg
