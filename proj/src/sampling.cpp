#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "polseg/data.hpp"

namespace polseg {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// P(X < hours) for X ~ LogNormal(mu, sigma).
double lognormal_cdf(double hours, double mu, double sigma) {
    if (hours <= 0.0) return 0.0;
    return normal_cdf((std::log(hours) - mu) / sigma);
}

// E[min(max(1, round(X / grid)), max_steps)].
double expected_rounded_steps(double mu, double sigma, int max_steps) {
    double e = 0.0;
    double below = 0.0;
    for (int k = 1; k < max_steps; ++k) {
        const double upper = lognormal_cdf((k + 0.5) * kGridHours, mu, sigma);
        e += k * (upper - below);
        below = upper;
    }
    e += max_steps * (1.0 - below);
    return e;
}

}  // namespace

void SamplingProfile::validate() const {
    if (distribution == IntervalDistribution::Empirical) {
        if (empirical_hours.empty()) throw std::invalid_argument("sampling profile: empty empirical interval set");
        for (double h : empirical_hours)
            if (!(h >= kGridHours)) throw std::invalid_argument("sampling profile: empirical interval below grid spacing");
        return;
    }
    if (mean_interval_hours < kGridHours)
        throw std::invalid_argument("sampling profile: mean interval " + std::to_string(mean_interval_hours) +
                                    " h is below the " + std::to_string(kGridHours) + " h grid spacing");
    if (max_interval_hours < mean_interval_hours)
        throw std::invalid_argument("sampling profile: max interval below mean interval");
    if (!(lognormal_sigma > 0)) throw std::invalid_argument("sampling profile: lognormal sigma must be positive");
}

bool SamplingProfile::is_identity() const {
    if (distribution == IntervalDistribution::Empirical)
        return std::all_of(empirical_hours.begin(), empirical_hours.end(),
                           [](double h) { return std::lround(h / kGridHours) <= 1; });
    return mean_interval_hours <= kGridHours;
}

SamplingProfile SamplingProfile::from_histogram_file(const std::filesystem::path& path, std::uint64_t seed) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open interval file " + path.string());
    SamplingProfile p;
    p.distribution = IntervalDistribution::Empirical;
    p.seed = seed;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        double hours = 0.0, count = 1.0;
        if (!(ls >> hours)) continue;  // header
        ls >> count;
        for (int i = 0; i < static_cast<int>(std::lround(count)); ++i) p.empirical_hours.push_back(hours);
    }
    double sum = 0.0;
    for (double h : p.empirical_hours) sum += h;
    p.mean_interval_hours = p.empirical_hours.empty() ? 0.0 : sum / static_cast<double>(p.empirical_hours.size());
    p.max_interval_hours = p.empirical_hours.empty() ? 0.0 : *std::max_element(p.empirical_hours.begin(), p.empirical_hours.end());
    p.validate();
    return p;
}

IntervalSampler::IntervalSampler(const SamplingProfile& profile) : profile_(profile) {
    profile_.validate();
    if (profile_.distribution == IntervalDistribution::Empirical || profile_.is_identity()) return;
    max_steps_ = std::max(1, static_cast<int>(std::lround(profile_.max_interval_hours / kGridHours)));
    const double target = profile_.mean_interval_hours / kGridHours;
    // Bisection on the log-location; the expectation is monotone in mu.
    double lo = std::log(kGridHours) - 10.0, hi = std::log(profile_.max_interval_hours) + 10.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (expected_rounded_steps(mid, profile_.lognormal_sigma, max_steps_) < target)
            lo = mid;
        else
            hi = mid;
    }
    mu_ = 0.5 * (lo + hi);
    expected_steps_ = expected_rounded_steps(mu_, profile_.lognormal_sigma, max_steps_);
}

int IntervalSampler::draw_steps(Rng& rng) const {
    if (profile_.distribution == IntervalDistribution::Empirical) {
        const auto& h = profile_.empirical_hours;
        const double hours = h[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(h.size()) - 1))];
        return std::max(1, static_cast<int>(std::lround(hours / kGridHours)));
    }
    if (profile_.is_identity()) return 1;
    const double hours = std::exp(mu_ + profile_.lognormal_sigma * rng.normal());
    return std::clamp(static_cast<int>(std::lround(hours / kGridHours)), 1, max_steps_);
}

std::vector<int> sample_observations(int length, const SamplingProfile& profile, Rng& rng) {
    IntervalSampler sampler(profile);
    std::vector<int> obs;
    for (int t = 0; t < length; t += sampler.draw_steps(rng)) obs.push_back(t);
    return obs;
}

OrbitSeries forward_fill(const OrbitSeries& series, const std::vector<int>& observed) {
    if (observed.empty() || observed.front() != 0)
        throw std::invalid_argument("forward_fill: the first grid point must be observed");
    OrbitSeries out = series;
    std::size_t next = 1;
    int last = 0;
    for (int t = 0; t < series.length(); ++t) {
        if (next < observed.size() && observed[next] == t) {
            last = t;
            ++next;
        } else if (t != 0) {
            out.values.row(t) = series.values.row(last);
        }
    }
    return out;
}

OrbitSeries downsample_forward_fill(const OrbitSeries& series, const SamplingProfile& profile, std::uint64_t stream) {
    for (std::size_t i = 1; i < series.timestamps.size(); ++i)
        if (std::abs(series.timestamps[i] - series.timestamps[i - 1] - kGridHours) > 1e-6)
            throw std::invalid_argument(series.object_id + ": downsampling needs a uniform 2 h grid");
    profile.validate();
    if (profile.is_identity()) return series;
    Rng rng(profile.seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
    return forward_fill(series, sample_observations(series.length(), profile, rng));
}

}  // namespace polseg
