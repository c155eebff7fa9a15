#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "polseg/tensor.hpp"

namespace polseg {

/// Control direction. EW and NS are identified by independent models.
enum class Direction { EW, NS };

std::string to_string(Direction d);
Direction parse_direction(std::string_view s);

/// Ordered class vocabulary for one direction. Class indices are positions
/// in `classes` and never depend on anything else.
class PoLVocab {
public:
    PoLVocab(Direction direction, std::vector<std::string> classes);

    /// EW: {ID, AD, EK, CK, HK}. NS: {ID, AD, CK, EK} unless overridden by config.
    static PoLVocab default_for(Direction direction);

    Direction direction() const { return direction_; }
    const std::vector<std::string>& classes() const { return classes_; }
    int size() const { return static_cast<int>(classes_.size()); }
    const std::string& name(int index) const;
    int index_of(std::string_view name) const;
    bool contains(std::string_view name) const;

    bool operator==(const PoLVocab& other) const = default;

private:
    Direction direction_;
    std::vector<std::string> classes_;
};

struct OrbitSeries {
    std::string object_id;
    std::vector<double> timestamps;  // hours since epoch, strictly increasing
    Mat values;                      // T x d
    std::vector<std::string> feature_names;

    int length() const { return static_cast<int>(values.rows()); }
    int dims() const { return static_cast<int>(values.cols()); }
    int feature_index(std::string_view name) const;  // -1 if absent
    /// Throws on shape mismatch, non-monotone timestamps or non-finite values.
    void validate() const;
};

struct LabelSeq {
    std::string object_id;
    Direction direction = Direction::EW;
    std::vector<int> labels;

    int length() const { return static_cast<int>(labels.size()); }
    void validate(int num_classes) const;
};

struct Segment {
    int label = 0;
    int start = 0;  // inclusive
    int end = 0;    // exclusive

    int length() const { return end - start; }
    bool operator==(const Segment&) const = default;
};

using SegmentList = std::vector<Segment>;

SegmentList rle_encode(const std::vector<int>& labels);
SegmentList rle_encode(const LabelSeq& labels);

/// Inverse of rle_encode. Throws naming the first gap, overlap or
/// non-maximal pair of adjacent runs.
std::vector<int> rle_decode(const SegmentList& segments, int length);

/// T x C indicator matrix.
Mat onehot(const std::vector<int>& labels, int num_classes);

/// Per-row argmax, ties resolved to the lowest index.
std::vector<int> argmax_rows(const Mat& m);

}  // namespace polseg
