#include "doctest.h"
#include "polseg/domain.hpp"

using namespace polseg;

TEST_CASE("vocabularies") {
    const PoLVocab ew = PoLVocab::default_for(Direction::EW);
    CHECK(ew.classes() == std::vector<std::string>{"ID", "AD", "EK", "CK", "HK"});
    CHECK(PoLVocab::default_for(Direction::NS).size() == 4);
    CHECK(ew.index_of("CK") == 3);
    CHECK_THROWS(PoLVocab(Direction::EW, {"A", "A"}));
    CHECK_THROWS(PoLVocab(Direction::EW, {"A"}));
    CHECK(parse_direction("ns") == Direction::NS);
    CHECK_THROWS(parse_direction("up"));
}

TEST_CASE("run-length encoding") {
    CHECK(rle_encode(std::vector<int>{0, 0, 1, 1, 1, 0}) == SegmentList{{0, 0, 2}, {1, 2, 5}, {0, 5, 6}});
    CHECK(rle_encode(std::vector<int>{0}) == SegmentList{{0, 0, 1}});
    CHECK(rle_encode(std::vector<int>{0, 1, 0, 1}).size() == 4);
    CHECK_THROWS(rle_encode(std::vector<int>{}));

    CHECK(rle_decode({{0, 0, 2}, {1, 2, 3}}, 3) == std::vector<int>{0, 0, 1});
    CHECK(rle_decode({}, 0).empty());
    CHECK_THROWS_WITH_AS(rle_decode({{0, 0, 2}, {0, 2, 4}}, 4), doctest::Contains("share a label"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(rle_decode({{0, 0, 2}, {1, 3, 4}}, 4), doctest::Contains("gap"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(rle_decode({{0, 0, 3}, {1, 2, 4}}, 4), doctest::Contains("overlap"), std::invalid_argument);
    CHECK_THROWS(rle_decode({{0, 0, 3}}, 4));

    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<int> x(static_cast<std::size_t>(rng.uniform_int(1, 40)));
        for (int& v : x) v = rng.uniform_int(0, 2);
        CHECK(rle_decode(rle_encode(x), static_cast<int>(x.size())) == x);
    }
}

TEST_CASE("one-hot") {
    const Mat m = onehot({0, 2}, 3);
    CHECK(m(0, 0) == 1.0);
    CHECK(m(1, 2) == 1.0);
    CHECK(m.sum() == 2.0);
    CHECK(onehot({0, 0, 0}, 1).isOnes());
    CHECK_THROWS(onehot({3}, 3));

    Rng rng(5);
    std::vector<int> x(50);
    for (int& v : x) v = rng.uniform_int(0, 4);
    CHECK(argmax_rows(onehot(x, 5)) == x);
    CHECK((onehot(x, 5).rowwise().sum().array() == 1.0).all());
}
