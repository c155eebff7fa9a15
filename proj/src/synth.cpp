#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "polseg/data.hpp"

namespace polseg {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kStepsPerDay = 24.0 / kGridHours;
constexpr double kGeoRadiusKm = 42164.17;
constexpr double kEarthRadiusKm = 6378.137;
// GEO longitude drift per km of semi-major-axis offset, deg/day.
constexpr double kDriftPerKm = -0.0128;
constexpr double kSiderealDegPerStep = 30.0821;
constexpr double kNaturalInclRate = 0.0027;  // deg/day

// Reference observation noise per canonical feature at noise_std = 1.
constexpr double kNoiseRef[9] = {0.2, 5e-6, 0.001, 0.05, 0.5, 0.05, 0.001, 0.003, 0.2};

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double wrap360(double deg) {
    double r = std::fmod(deg, 360.0);
    return r < 0 ? r + 360.0 : r;
}

double wrap180(double deg) {
    double r = wrap360(deg + 180.0) - 180.0;
    return r == -180.0 ? 180.0 : r;
}

bool is_drift(const std::string& c) { return c == "ID" || c == "AD"; }

enum class Signature { Drift, Impulsive, Continuous, Hybrid };

Signature signature_of(const std::string& c) {
    if (is_drift(c)) return Signature::Drift;
    if (c == "CK") return Signature::Impulsive;
    if (c == "EK") return Signature::Continuous;
    if (c == "HK") return Signature::Hybrid;
    throw std::invalid_argument("synthetic generator has no dynamics for class '" + c + "'");
}

struct GrammarParams {
    const std::map<std::string, double>* mean_duration;
    double rate_min;
    double rate_max;
    bool signed_rates;  // EW drift can go either way; NS inclination grows
    double start_in_drift_prob;
};

double sample_duration(const GrammarParams& g, const std::string& c, int min_segment, Rng& rng) {
    auto it = g.mean_duration->find(c);
    const double mean = it == g.mean_duration->end() ? 300.0 : it->second;
    return std::max<double>(min_segment, mean * (0.5 + rng.uniform()));
}

double sample_initial_rate(const GrammarParams& g, Rng& rng) {
    double r = g.rate_min + (g.rate_max - g.rate_min) * rng.uniform();
    if (g.signed_rates && rng.uniform() < 0.5) r = -r;
    return r;
}

double sample_adjusted_rate(const GrammarParams& g, double previous, Rng& rng) {
    // Sign reversal or a clear change in magnitude.
    double f = rng.uniform() < 0.5 ? -(0.5 + rng.uniform()) : 1.8 + 0.8 * rng.uniform();
    double r = previous * f;
    const double mag = std::clamp(std::abs(r), g.rate_min, 2.0 * g.rate_max);
    return std::copysign(mag, r);
}

std::vector<ScriptSegment> sample_script(const PoLVocab& vocab, const GrammarParams& g, int length, int min_segment,
                                         Rng& rng) {
    std::vector<std::string> keeping;
    for (const auto& c : vocab.classes())
        if (!is_drift(c)) {
            signature_of(c);
            keeping.push_back(c);
        }
    const bool has_id = vocab.contains("ID");
    const bool has_ad = vocab.contains("AD");
    auto random_keeping = [&]() -> std::string {
        if (keeping.empty()) return "ID";
        return keeping[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(keeping.size()) - 1))];
    };

    std::vector<ScriptSegment> script;
    std::string current = (has_id && rng.uniform() < g.start_in_drift_prob) || keeping.empty() ? "ID" : random_keeping();
    double rate = 0.0;
    int used = 0;
    bool first = true;
    while (used < length) {
        if (is_drift(current)) rate = current == "ID" ? sample_initial_rate(g, rng) : sample_adjusted_rate(g, rate, rng);
        int steps = static_cast<int>(std::lround(sample_duration(g, current, min_segment, rng)));
        if (first) steps = min_segment + static_cast<int>(rng.uniform() * (steps - min_segment + 1));
        first = false;
        steps = std::min(steps, length - used);
        const int rest = length - used - steps;
        if (rest > 0 && rest < min_segment) steps += rest;
        if (steps < min_segment && !script.empty()) {
            script.back().steps += steps;
        } else {
            script.push_back({current, steps, is_drift(current) ? rate : 0.0});
        }
        used += steps;

        if (current == "ID" && has_ad && rng.uniform() < 0.4) {
            current = "AD";
        } else if (is_drift(current)) {
            current = random_keeping();
        } else if (has_id) {
            current = "ID";
        } else if (keeping.size() > 1) {
            while (current == script.back().label) current = random_keeping();
        } else if (used < length) {
            script.back().steps += length - used;
            used = length;
        }
    }
    return script;
}

void check_script(const std::vector<ScriptSegment>& script, const PoLVocab& vocab, int length, int min_segment) {
    int total = 0;
    for (std::size_t i = 0; i < script.size(); ++i) {
        const auto& s = script[i];
        if (!vocab.contains(s.label))
            throw std::invalid_argument("forced script class '" + s.label + "' not in " +
                                        to_string(vocab.direction()) + " vocabulary");
        if (s.steps < min_segment)
            throw std::invalid_argument("forced script segment " + std::to_string(i) + " shorter than " +
                                        std::to_string(min_segment) + " steps");
        if (i > 0 && script[i - 1].label == s.label)
            throw std::invalid_argument("forced script repeats class '" + s.label + "' in adjacent segments");
        signature_of(s.label);
        total += s.steps;
    }
    if (total != length)
        throw std::invalid_argument("forced script covers " + std::to_string(total) + " steps, series has " +
                                    std::to_string(length));
}

// Deadband-limited longitude excursion and its rate (deg, deg/day) at `tau`
// steps into a station-keeping segment.
struct Excursion {
    double offset = 0.0;
    double rate = 0.0;
    bool burn = false;
};

Excursion impulsive(double amplitude, double interval_days, int tau) {
    const double period = interval_days * kStepsPerDay;
    const double u = std::fmod(static_cast<double>(tau), period) / period;
    Excursion e;
    e.offset = amplitude * 4.0 * u * (1.0 - u);
    e.rate = amplitude * 4.0 * (1.0 - 2.0 * u) / interval_days;
    e.burn = tau > 0 && std::fmod(static_cast<double>(tau), period) < 1.0;
    return e;
}

Excursion continuous(double amplitude, double period_days, int tau) {
    const double w = kTwoPi / (period_days * kStepsPerDay);
    Excursion e;
    e.offset = amplitude * std::sin(w * tau);
    e.rate = amplitude * w * kStepsPerDay * std::cos(w * tau);
    return e;
}

}  // namespace

const std::vector<std::string>& canonical_features() {
    static const std::vector<std::string> names{"semi_major_axis", "eccentricity", "inclination",
                                                "raan",            "arg_perigee",  "mean_anomaly",
                                                "latitude",        "longitude",    "altitude"};
    return names;
}

const std::vector<std::string>& keplerian_features() {
    static const std::vector<std::string> names(canonical_features().begin(), canonical_features().begin() + 6);
    return names;
}

bool is_circular_feature(const std::string& name) {
    return name == "longitude" || name == "raan" || name == "arg_perigee" || name == "mean_anomaly";
}

void SynthConfig::validate() const {
    if (n_objects < 1) throw std::invalid_argument("synth: n_objects must be >= 1");
    if (min_segment < 12) throw std::invalid_argument("synth: min_segment must be >= 12 timesteps (1 day)");
    if (length < min_segment) throw std::invalid_argument("synth: length shorter than one minimum segment");
    if (noise_std < 0) throw std::invalid_argument("synth: noise_std must be >= 0");
    if (!(drift_rate_min > 0 && drift_rate_max >= drift_rate_min))
        throw std::invalid_argument("synth: invalid EW drift rate range");
    if (!(incl_rate_min > 0 && incl_rate_max >= incl_rate_min))
        throw std::invalid_argument("synth: invalid NS drift rate range");
    if (deadband_deg <= 0) throw std::invalid_argument("synth: deadband must be positive");
    if (ck_burn_interval_days <= 0 || hk_burn_interval_days <= 0 || ek_period_days <= 0 ||
        ns_ck_burn_interval_days <= 0)
        throw std::invalid_argument("synth: maneuver periods must be positive");
    for (const auto* m : {&ew_mean_duration, &ns_mean_duration})
        for (const auto& [c, d] : *m)
            if (d < min_segment)
                throw std::invalid_argument("synth: mean duration of " + c + " below the minimum segment length");
}

std::vector<SynthObject> synth_generate(const SynthConfig& cfg, const PoLVocab& ew_vocab, const PoLVocab& ns_vocab) {
    cfg.validate();
    if (ew_vocab.direction() != Direction::EW || ns_vocab.direction() != Direction::NS)
        throw std::invalid_argument("synth: vocabularies must be EW and NS");
    const int T = cfg.length;
    const GrammarParams ew_g{&cfg.ew_mean_duration, cfg.drift_rate_min, cfg.drift_rate_max, true,
                             cfg.start_in_drift_prob};
    const GrammarParams ns_g{&cfg.ns_mean_duration, cfg.incl_rate_min, cfg.incl_rate_max, false,
                             cfg.start_in_drift_prob};

    std::vector<SynthObject> out;
    out.reserve(static_cast<std::size_t>(cfg.n_objects));
    for (int n = 0; n < cfg.n_objects; ++n) {
        Rng rng(splitmix64(cfg.seed * 0x100000001b3ULL + static_cast<std::uint64_t>(n)));
        SynthObject obj;
        auto forced = cfg.forced.find(n);
        if (forced != cfg.forced.end() && !forced->second.ew.empty()) {
            check_script(forced->second.ew, ew_vocab, T, cfg.min_segment);
            obj.ew_script = forced->second.ew;
        } else {
            obj.ew_script = sample_script(ew_vocab, ew_g, T, cfg.min_segment, rng);
        }
        if (forced != cfg.forced.end() && !forced->second.ns.empty()) {
            check_script(forced->second.ns, ns_vocab, T, cfg.min_segment);
            obj.ns_script = forced->second.ns;
        } else {
            obj.ns_script = sample_script(ns_vocab, ns_g, T, cfg.min_segment, rng);
        }
        for (auto* script : {&obj.ew_script, &obj.ns_script}) {
            const bool ew = script == &obj.ew_script;
            double prev = 0.0;
            for (auto& s : *script) {
                if (!is_drift(s.label) || s.rate != 0.0) {
                    if (is_drift(s.label)) prev = s.rate;
                    continue;
                }
                const GrammarParams& g = ew ? ew_g : ns_g;
                s.rate = (s.label == "AD" && prev != 0.0) ? sample_adjusted_rate(g, prev, rng) : sample_initial_rate(g, rng);
                prev = s.rate;
            }
        }

        // East-west: longitude, its rate, eccentricity and perigee.
        std::vector<double> lon(static_cast<std::size_t>(T)), lon_rate(static_cast<std::size_t>(T)),
            ecc(static_cast<std::size_t>(T)), argp(static_cast<std::size_t>(T));
        double lam = -180.0 + 360.0 * rng.uniform();
        double e = 1e-4 + 3e-4 * rng.uniform();
        double w = 360.0 * rng.uniform();
        const double ek_phase = kTwoPi * rng.uniform();
        int k0 = 0;
        std::vector<int> ew_labels;
        for (const auto& seg : obj.ew_script) {
            const Signature sig = signature_of(seg.label);
            const double lam_s = lam;
            const double e_s = e;
            auto excursion = [&](int tau) {
                Excursion x;
                const double db = cfg.deadband_deg;
                switch (sig) {
                    case Signature::Drift: x.offset = seg.rate * tau / kStepsPerDay; x.rate = seg.rate; break;
                    case Signature::Impulsive: x = impulsive(db, cfg.ck_burn_interval_days, tau); break;
                    case Signature::Continuous: x = continuous(cfg.ek_amplitude * db, cfg.ek_period_days, tau); break;
                    case Signature::Hybrid: {
                        Excursion a = impulsive(0.5 * db, cfg.hk_burn_interval_days, tau);
                        Excursion b = continuous(0.5 * cfg.ek_amplitude * db, cfg.ek_period_days, tau);
                        x = {a.offset + b.offset, a.rate + b.rate, a.burn};
                        break;
                    }
                }
                return x;
            };
            for (int tau = 0; tau < seg.steps; ++tau) {
                const auto k = static_cast<std::size_t>(k0 + tau);
                const Excursion x = excursion(tau);
                lon[k] = lam_s + x.offset;
                lon_rate[k] = x.rate;
                if (x.burn) {
                    const double jump = sig == Signature::Hybrid ? 1e-5 : 2e-5;
                    e = std::max(2e-5, e + jump * rng.normal());
                    w = wrap360(w + 5.0 * rng.normal());
                }
                if (sig == Signature::Continuous || sig == Signature::Hybrid)
                    ecc[k] = e + 1e-5 * std::sin(kTwoPi * tau / (cfg.ek_period_days * kStepsPerDay) + ek_phase);
                else
                    ecc[k] = e;
                argp[k] = w;
                ew_labels.push_back(ew_vocab.index_of(seg.label));
            }
            lam = lam_s + excursion(seg.steps).offset;
            (void)e_s;
            k0 += seg.steps;
        }

        // North-south: inclination and node.
        std::vector<double> incl(static_cast<std::size_t>(T)), node(static_cast<std::size_t>(T));
        const bool ns_drift_start = is_drift(obj.ns_script.front().label);
        double inc = ns_drift_start ? 0.1 + 1.4 * rng.uniform() : 0.01 + 0.07 * rng.uniform();
        double om = 360.0 * rng.uniform();
        k0 = 0;
        std::vector<int> ns_labels;
        for (const auto& seg : obj.ns_script) {
            const Signature sig = signature_of(seg.label);
            const double inc_s = inc;
            auto offset = [&](int tau) {
                switch (sig) {
                    case Signature::Drift: return seg.rate * tau / kStepsPerDay;
                    case Signature::Impulsive: {
                        const double period = cfg.ns_ck_burn_interval_days * kStepsPerDay;
                        return kNaturalInclRate * std::fmod(static_cast<double>(tau), period) / kStepsPerDay;
                    }
                    case Signature::Continuous: return 0.001 * std::sin(kTwoPi * tau / (cfg.ek_period_days * kStepsPerDay));
                    case Signature::Hybrid: {
                        const double period = 0.5 * cfg.ns_ck_burn_interval_days * kStepsPerDay;
                        return 0.5 * kNaturalInclRate * std::fmod(static_cast<double>(tau), period) / kStepsPerDay +
                               0.0005 * std::sin(kTwoPi * tau / (cfg.ek_period_days * kStepsPerDay));
                    }
                }
                return 0.0;
            };
            const double node_rate = sig == Signature::Drift ? -0.0134 : 0.0;
            for (int tau = 0; tau < seg.steps; ++tau) {
                const auto k = static_cast<std::size_t>(k0 + tau);
                incl[k] = std::abs(inc_s + offset(tau));
                node[k] = om + node_rate * tau / kStepsPerDay;
                ns_labels.push_back(ns_vocab.index_of(seg.label));
            }
            inc = std::abs(inc_s + offset(seg.steps));
            om += node_rate * seg.steps / kStepsPerDay;
            k0 += seg.steps;
        }

        const double phi_lon = kTwoPi * rng.uniform();
        const double phi_lat = kTwoPi * rng.uniform();
        const double phi_alt = kTwoPi * rng.uniform();
        const double theta0 = 360.0 * rng.uniform();

        OrbitSeries& s = obj.object.series;
        s.object_id = "SYN" + std::string(5 - std::min<std::size_t>(5, std::to_string(n).size()), '0') + std::to_string(n);
        s.feature_names = canonical_features();
        s.timestamps.resize(static_cast<std::size_t>(T));
        s.values.resize(T, 9);
        for (int k = 0; k < T; ++k) {
            const auto ku = static_cast<std::size_t>(k);
            const double daily = kTwoPi * k / kStepsPerDay;
            const double a = kGeoRadiusKm + lon_rate[ku] / kDriftPerKm;
            const double lon_k = lon[ku] + cfg.daily_amplitude_deg * std::sin(daily + phi_lon);
            s.timestamps[ku] = kGridHours * k;
            s.values(k, 0) = a;
            s.values(k, 1) = ecc[ku];
            s.values(k, 2) = incl[ku];
            s.values(k, 3) = wrap360(node[ku]);
            s.values(k, 4) = argp[ku];
            s.values(k, 5) = wrap360(lon[ku] + theta0 + kSiderealDegPerStep * k - node[ku] - argp[ku]);
            s.values(k, 6) = incl[ku] * std::sin(daily + phi_lat);
            s.values(k, 7) = wrap180(lon_k);
            s.values(k, 8) = a - kEarthRadiusKm - a * ecc[ku] * std::cos(daily + phi_alt);
        }
        if (cfg.noise_std > 0)
            for (int k = 0; k < T; ++k)
                for (int f = 0; f < 9; ++f) s.values(k, f) += cfg.noise_std * kNoiseRef[f] * rng.normal();
        for (int f : {3, 4, 5}) s.values.col(f) = s.values.col(f).unaryExpr([](double v) { return wrap360(v); });
        s.values.col(7) = s.values.col(7).unaryExpr([](double v) { return wrap180(v); });

        obj.object.ew = {s.object_id, Direction::EW, std::move(ew_labels)};
        obj.object.ns = {s.object_id, Direction::NS, std::move(ns_labels)};
        out.push_back(std::move(obj));
    }
    return out;
}

std::vector<LabeledObject> objects_of(const std::vector<SynthObject>& synth) {
    std::vector<LabeledObject> out;
    out.reserve(synth.size());
    for (const auto& s : synth) out.push_back(s.object);
    return out;
}

}  // namespace polseg
