#include "polseg/params.hpp"

#include <cmath>
#include <stdexcept>

namespace polseg {

int ParameterSet::add(std::string name, Mat value) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
    const int id = size();
    index_.emplace(name, id);
    names_.push_back(std::move(name));
    values_.push_back(std::move(value));
    return id;
}

int ParameterSet::id(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw std::out_of_range("no parameter named '" + std::string(name) + "'");
    return it->second;
}

bool ParameterSet::contains(std::string_view name) const { return index_.count(std::string(name)) > 0; }

Mat& ParameterSet::at(std::string_view name) { return (*this)[id(name)]; }
const Mat& ParameterSet::at(std::string_view name) const { return (*this)[id(name)]; }

Eigen::Index ParameterSet::scalar_count() const {
    Eigen::Index n = 0;
    for (const auto& v : values_) n += v.size();
    return n;
}

ParameterSet ParameterSet::zeros_like() const {
    ParameterSet out;
    for (int i = 0; i < size(); ++i) out.add(names_[static_cast<std::size_t>(i)], Mat::Zero((*this)[i].rows(), (*this)[i].cols()));
    return out;
}

void ParameterSet::set_zero() {
    for (auto& v : values_) v.setZero();
}

void ParameterSet::add_scaled(const ParameterSet& other, double scale) {
    if (other.size() != size()) throw std::invalid_argument("add_scaled: parameter count mismatch");
    for (int i = 0; i < size(); ++i) (*this)[i] += scale * other[i];
}

bool ParameterSet::all_finite() const {
    for (const auto& v : values_)
        if (!v.allFinite()) return false;
    return true;
}

Adam::Adam(const ParameterSet& params, AdamConfig cfg)
    : cfg_(cfg), m_(params.zeros_like()), v_(params.zeros_like()) {
    if (!(cfg_.lr > 0)) throw std::invalid_argument("learning rate must be positive");
}

double Adam::current_lr() const { return cfg_.lr / (1.0 + cfg_.lr_decay * static_cast<double>(t_)); }

void Adam::step(ParameterSet& params, const ParameterSet& grads) {
    ++t_;
    const double lr = cfg_.lr / (1.0 + cfg_.lr_decay * static_cast<double>(t_ - 1));
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (int i = 0; i < params.size(); ++i) {
        Mat g = grads[i];
        if (cfg_.weight_decay != 0.0) g += cfg_.weight_decay * params[i];
        m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
        v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
        params[i].array() -= lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + cfg_.eps);
    }
}

}  // namespace polseg
