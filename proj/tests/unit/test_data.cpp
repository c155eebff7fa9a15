#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "polseg/data.hpp"

using namespace polseg;
namespace fs = std::filesystem;

namespace {

const PoLVocab kEW = PoLVocab::default_for(Direction::EW);
const PoLVocab kNS = PoLVocab::default_for(Direction::NS);

SynthConfig small_config(int n, int length, std::uint64_t seed) {
    SynthConfig c;
    c.n_objects = n;
    c.length = length;
    c.seed = seed;
    return c;
}

OrbitSeries ramp(int T, int d) {
    OrbitSeries s;
    s.object_id = "R";
    for (int t = 0; t < T; ++t) s.timestamps.push_back(kGridHours * t);
    s.values.resize(T, d);
    for (int t = 0; t < T; ++t)
        for (int j = 0; j < d; ++j) s.values(t, j) = 100.0 * j + t;
    for (int j = 0; j < d; ++j) s.feature_names.push_back("f" + std::to_string(j));
    return s;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("polseg_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("synthetic generator echoes forced scripts") {
    SynthConfig c = small_config(1, 600, 4);
    c.noise_std = 0.0;
    c.forced[0].ew = {{"ID", 200, 0.2}, {"EK", 400, 0.0}};
    const auto objs = synth_generate(c, kEW, kNS);
    REQUIRE(objs.size() == 1);
    const LabelSeq& y = objs[0].object.ew;
    CHECK(std::count(y.labels.begin(), y.labels.begin() + 200, kEW.index_of("ID")) == 200);
    CHECK(std::count(y.labels.begin() + 200, y.labels.end(), kEW.index_of("EK")) == 400);

    const OrbitSeries& s = objs[0].object.series;
    const int lon = s.feature_index("longitude");
    for (int k = 1; k <= 10; ++k) {
        const double diff = s.values(12 * k + 5, lon) - s.values(5, lon);
        CHECK(std::abs(diff - 0.2 * k) < 1e-9);
    }
}

TEST_CASE("synthetic generator invariants and determinism") {
    const SynthConfig c = small_config(20, 720, 9);
    const auto a = synth_generate(c, kEW, kNS);
    const auto b = synth_generate(c, kEW, kNS);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].object.series.values == b[i].object.series.values);
        CHECK(a[i].object.ew.labels == b[i].object.ew.labels);
        for (Direction d : {Direction::EW, Direction::NS}) {
            const LabelSeq& y = a[i].object.labels(d);
            CHECK(y.length() == 720);
            const SegmentList segs = rle_encode(y);
            // The first segment may be a partial continuation.
            for (std::size_t k = 1; k < segs.size(); ++k) CHECK(segs[k].length() >= c.min_segment);
        }
        CHECK(a[i].object.series.dims() == 9);
        CHECK(a[i].object.series.values.allFinite());
    }
    SynthConfig bad = c;
    bad.forced[0].ew = {{"ID", 5, 0.1}, {"EK", 715, 0.0}};
    CHECK_THROWS(synth_generate(bad, kEW, kNS));
}

TEST_CASE("forward fill") {
    const OrbitSeries s = ramp(10, 2);
    const OrbitSeries f = forward_fill(s, {0, 5});
    for (int t = 0; t < 10; ++t) CHECK(f.values(t, 1) == s.values(t < 5 ? 0 : 5, 1));
    CHECK(f.timestamps == s.timestamps);

    SamplingProfile identity;
    identity.mean_interval_hours = kGridHours;
    CHECK(downsample_forward_fill(s, identity).values == s.values);

    SamplingProfile too_fast;
    too_fast.mean_interval_hours = 1.0;
    CHECK_THROWS(downsample_forward_fill(s, too_fast));
}

TEST_CASE("sampling profile reaches its mean and tail") {
    const SamplingProfile p;
    const IntervalSampler sampler(p);
    Rng rng(12);
    double sum = 0;
    int longest = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const int k = sampler.draw_steps(rng);
        sum += k;
        longest = std::max(longest, k);
    }
    CHECK(std::abs(sum / n - 6.85) < 0.05 * 6.85);
    CHECK(longest * kGridHours > 7 * 24);

    // Realized run lengths of repeated values after forward fill.
    const OrbitSeries s = ramp(2000, 1);
    long runs = 0, steps = 0;
    for (int obj = 0; obj < 100; ++obj) {
        const OrbitSeries f = downsample_forward_fill(s, p, static_cast<std::uint64_t>(obj));
        CHECK(f.length() == s.length());
        int t = 0;
        while (t < f.length()) {
            int e = t + 1;
            while (e < f.length() && f.values(e, 0) == f.values(t, 0)) ++e;
            if (e < f.length()) {  // drop the censored final run
                ++runs;
                steps += e - t;
            }
            t = e;
        }
    }
    CHECK(std::abs(static_cast<double>(steps) / runs - 6.85) < 0.1 * 6.85);
}

TEST_CASE("normalization") {
    OrbitSeries s = ramp(50, 3);
    s.values.col(2).setConstant(7.0);
    std::vector<std::string> warnings;
    const NormStats st = fit_normalizer({s}, [&](const std::string& w) { warnings.push_back(w); });
    CHECK(warnings.size() == 1);
    const OrbitSeries n = apply_normalizer(s, st);
    CHECK(n.values.col(2).isZero());
    for (int j = 0; j < 2; ++j) {
        const double mean = n.values.col(j).mean();
        const double var = (n.values.col(j).array() - mean).square().sum() / n.length();
        CHECK(std::abs(mean) < 1e-10);
        CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-10);
    }
    OrbitSeries other = s;
    other.values.array() += 5.0;
    CHECK(std::abs(apply_normalizer(other, st).values.col(0).mean()) > 0.1);

    CHECK(NormStats::from_json(st.to_json()).mean == st.mean);
}

TEST_CASE("longitude unwrapping") {
    Mat v(4, 1);
    v << 359.0, 1.0, 3.0, 358.0;
    unwrap_degrees(v, 0);
    CHECK(v(1, 0) == 361.0);
    CHECK(v(2, 0) == 363.0);
    CHECK(v(3, 0) == 358.0);
}

TEST_CASE("object-level split") {
    const auto objs = objects_of(synth_generate(small_config(10, 48, 1), kEW, kNS));
    const DatasetSplit a = split(objs, 0.8, 3);
    CHECK(a.train.size() == 8);
    CHECK(a.test.size() == 2);
    const DatasetSplit b = split(objs, 0.8, 3);
    for (std::size_t i = 0; i < a.train.size(); ++i) CHECK(a.train[i].series.object_id == b.train[i].series.object_id);
    std::set<std::string> ids;
    for (const auto& o : a.train) ids.insert(o.series.object_id);
    for (const auto& o : a.test) CHECK(ids.count(o.series.object_id) == 0);

    std::vector<LabeledObject> many(1900, objs[0]);
    for (std::size_t i = 0; i < many.size(); ++i) many[i].series.object_id = "M" + std::to_string(i);
    const DatasetSplit big = split(many, 0.8, 0);
    CHECK(big.train.size() == 1520);
    CHECK(big.test.size() == 380);
    CHECK_THROWS(split({objs[0]}, 0.8, 0));
}

TEST_CASE("transition labels") {
    std::vector<Transition> tr{{"X", 100, Direction::EW, "EK"}, {"X", 0, Direction::EW, "ID"}};
    const LabelSeq y = labels_from_transitions("X", Direction::EW, tr, 200, kEW);
    CHECK(std::count(y.labels.begin(), y.labels.begin() + 100, 0) == 100);
    CHECK(std::count(y.labels.begin() + 100, y.labels.end(), 2) == 100);
    CHECK_THROWS(labels_from_transitions("X", Direction::EW, {}, 200, kEW));
    CHECK_THROWS(labels_from_transitions("X", Direction::EW, {{"X", 250, Direction::EW, "ID"}}, 200, kEW));
    const auto back = to_transitions(y, kEW);
    CHECK(back.size() == 2);
}

TEST_CASE("dataset files round trip") {
    const fs::path dir = scratch("dataset");
    const auto objs = objects_of(synth_generate(small_config(3, 60, 2), kEW, kNS));
    write_dataset(dir, objs, kEW, kNS);
    const auto loaded = load_splid(dir / "series", dir / "labels.csv", kEW, kNS);
    REQUIRE(loaded.size() == 3);
    for (const auto& o : loaded) {
        auto it = std::find_if(objs.begin(), objs.end(),
                               [&](const LabeledObject& x) { return x.series.object_id == o.series.object_id; });
        REQUIRE(it != objs.end());
        CHECK(o.ew.labels == it->ew.labels);
        CHECK(o.ns.labels == it->ns.labels);
        CHECK((o.series.values - it->series.values).cwiseAbs().maxCoeff() < 1e-9);
    }

    // Missing feature column.
    std::ofstream(dir / "bad.csv") << "timestamp,semi_major_axis\n0,42164\n";
    CHECK_THROWS_WITH(read_series_csv(dir / "bad.csv", canonical_features()), doctest::Contains("missing feature"));
}
