#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "polseg/metrics.hpp"

using namespace polseg;

namespace {

// Full-table DP, written independently of the library's rolling-row version.
int levenshtein_table(const std::vector<int>& a, const std::vector<int>& b) {
    std::vector<std::vector<int>> d(a.size() + 1, std::vector<int>(b.size() + 1));
    for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = static_cast<int>(i);
    for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = static_cast<int>(j);
    for (std::size_t i = 1; i <= a.size(); ++i)
        for (std::size_t j = 1; j <= b.size(); ++j)
            d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    return d[a.size()][b.size()];
}

std::vector<int> runs(std::initializer_list<std::pair<int, int>> spec) {
    std::vector<int> out;
    for (auto [label, n] : spec) out.insert(out.end(), static_cast<std::size_t>(n), label);
    return out;
}

}  // namespace

TEST_CASE("accuracy") {
    CHECK(accuracy({0, 1, 1}, {0, 1, 1}) == 100.0);
    CHECK(accuracy({0, 1, 0}, {1, 0, 1}) == 0.0);
    CHECK(accuracy({0, 0, 1}, {0, 1, 1}) == doctest::Approx(66.6667).epsilon(1e-5));
    CHECK_THROWS(accuracy({0}, {0, 1}));
}

TEST_CASE("levenshtein agrees with full-table oracle") {
    Rng rng(17);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<int> a(static_cast<std::size_t>(rng.uniform_int(1, 20)));
        std::vector<int> b(static_cast<std::size_t>(rng.uniform_int(1, 20)));
        for (int& v : a) v = rng.uniform_int(0, 4);
        for (int& v : b) v = rng.uniform_int(0, 4);
        REQUIRE(levenshtein(a, b) == levenshtein_table(a, b));
    }
}

TEST_CASE("edit score") {
    CHECK(edit_score(runs({{0, 3}, {1, 4}}), runs({{0, 5}, {1, 2}})) == 100.0);
    CHECK(edit_score(runs({{0, 2}, {1, 2}, {0, 2}}), runs({{0, 3}, {1, 3}})) == doctest::Approx(200.0 / 3.0));
    CHECK(edit_score({0, 0, 0}, {1, 1, 1}) == 0.0);
    CHECK(edit_score({0, 0, 1}, {0, 1, 1}, EditGranularity::Frames) == doctest::Approx(200.0 / 3.0));
    CHECK_THROWS(edit_score({}, {0}));
}

TEST_CASE("segmental F1 golden cases") {
    std::ifstream in(std::string(POLSEG_TEST_DATA) + "/f1_golden.json");
    REQUIRE(in);
    const nlohmann::json golden = nlohmann::json::parse(in);
    auto segs = [](const nlohmann::json& j) {
        SegmentList out;
        for (const auto& s : j) out.push_back({s[0].get<int>(), s[1].get<int>(), s[2].get<int>()});
        return out;
    };
    for (const auto& c : golden.at("cases")) {
        for (const auto& [tau, expect] : c.at("expect").items()) {
            CAPTURE(c.at("name").get<std::string>());
            CAPTURE(tau);
            const SegmentalF1 r = segmental_f1(segs(c.at("truth")), segs(c.at("pred")), std::stod(tau));
            CHECK(std::abs(r.precision - expect[0].get<double>()) < 1e-9);
            CHECK(std::abs(r.recall - expect[1].get<double>()) < 1e-9);
            CHECK(std::abs(r.f1 - expect[2].get<double>()) < 1e-9);
        }
    }
}

TEST_CASE("segmental F1 properties") {
    Rng rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<int> t(60), p(60);
        int a = 0, b = 0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (rng.uniform() < 0.1) a = rng.uniform_int(0, 2);
            if (rng.uniform() < 0.15) b = rng.uniform_int(0, 2);
            t[i] = a;
            p[i] = b;
        }
        CHECK(segmental_f1(t, t, 0.5).f1 == 100.0);
        CHECK(segmental_f1(t, p, 0.1).f1 >= segmental_f1(t, p, 0.25).f1);
        CHECK(segmental_f1(t, p, 0.25).f1 >= segmental_f1(t, p, 0.5).f1);
    }
}

TEST_CASE("evaluate and report round trip") {
    const PoLVocab vocab(Direction::EW, {"A", "B", "C"});
    const std::vector<int> y = runs({{0, 5}, {1, 5}, {2, 5}});
    EvalReport perfect = evaluate({{"o1", y, y}}, vocab);
    CHECK(perfect.acc == 100.0);
    CHECK(perfect.edit == 100.0);
    CHECK(perfect.f1.at("0.10") == 100.0);

    const EvalReport r = evaluate({{"o1", y, runs({{0, 7}, {2, 8}})}, {"o2", y, y}}, vocab);
    CHECK(r.n_objects == 2);
    const EvalReport back = EvalReport::from_json(r.to_json());
    CHECK(back.acc == r.acc);
    CHECK(back.edit == r.edit);
    CHECK(back.f1 == r.f1);
    CHECK(back.f1_macro == r.f1_macro);
    CHECK(r.to_table(true).find("F1@10") != std::string::npos);
}

TEST_CASE("pairing reports missing ids") {
    std::map<std::string, std::vector<int>> truth{{"a", {0}}, {"b", {1}}};
    std::map<std::string, std::vector<int>> pred{{"a", {0}}, {"c", {1}}};
    try {
        pair_predictions(truth, pred);
        FAIL("expected MissingObjectsError");
    } catch (const MissingObjectsError& e) {
        CHECK(e.missing_predictions() == std::vector<std::string>{"b"});
        CHECK(e.missing_truth() == std::vector<std::string>{"c"});
    }
}
