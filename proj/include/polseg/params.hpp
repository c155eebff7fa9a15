#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "polseg/tensor.hpp"

namespace polseg {

/// Ordered collection of named parameter matrices. Order is insertion order
/// and is part of the serialized format.
class ParameterSet {
public:
    int add(std::string name, Mat value);

    Mat& operator[](int id) { return values_[static_cast<std::size_t>(id)]; }
    const Mat& operator[](int id) const { return values_[static_cast<std::size_t>(id)]; }
    Mat& at(std::string_view name);
    const Mat& at(std::string_view name) const;
    int id(std::string_view name) const;
    bool contains(std::string_view name) const;
    const std::string& name(int id) const { return names_[static_cast<std::size_t>(id)]; }
    int size() const { return static_cast<int>(values_.size()); }
    Eigen::Index scalar_count() const;

    /// Same names and shapes, zero values.
    ParameterSet zeros_like() const;
    void set_zero();
    /// this += scale * other (shapes must match).
    void add_scaled(const ParameterSet& other, double scale);
    bool all_finite() const;

private:
    std::vector<std::string> names_;
    std::vector<Mat> values_;
    std::unordered_map<std::string, int> index_;
};

struct AdamConfig {
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-5;  // L2 term added to the gradient
    double lr_decay = 0.0;       // lr_t = lr / (1 + lr_decay * t)
};

class Adam {
public:
    Adam(const ParameterSet& params, AdamConfig cfg);
    void step(ParameterSet& params, const ParameterSet& grads);
    long steps() const { return t_; }
    double current_lr() const;

private:
    AdamConfig cfg_;
    ParameterSet m_;
    ParameterSet v_;
    long t_ = 0;
};

}  // namespace polseg
