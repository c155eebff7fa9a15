#include <filesystem>
#include <fstream>
#include <limits>

#include "doctest.h"
#include "polseg/engine.hpp"

using namespace polseg;
namespace fs = std::filesystem;

namespace {

ModelConfig small_model(Direction d = Direction::EW) {
    ModelConfig m;
    m.vocab = PoLVocab::default_for(d);
    m.encoder.hidden = 8;
    m.encoder.layers = 2;
    m.encoder.kernel = 3;
    m.decoder.layers = 1;
    m.diffusion_steps = 50;
    m.infer_steps = 5;
    m.sync_dimensions();
    return m;
}

TrainConfig short_training(int iters) {
    TrainConfig t;
    t.batch_size = 2;
    t.max_iters = iters;
    t.seed = 4;
    t.log_every = 0;
    return t;
}

DatasetSplit small_split() {
    SynthConfig s;
    s.n_objects = 8;
    s.length = 96;
    s.seed = 2;
    const auto objects = objects_of(
        synth_generate(s, PoLVocab::default_for(Direction::EW), PoLVocab::default_for(Direction::NS)));
    return split(objects, 0.75, 1);
}

fs::path temp_path(const std::string& name) { return fs::temp_directory_path() / ("polseg_test_" + name); }

}  // namespace

TEST_CASE("zero iterations yields the initial parameters") {
    const DatasetSplit data = small_split();
    const ModelConfig m = small_model();
    const ModelBundle b = train(data, m, short_training(0));
    CHECK(b.meta.loss_curve.empty());
    const ParameterSet init = init_parameters(m, 4);
    REQUIRE(init.size() == b.params.size());
    for (int i = 0; i < init.size(); ++i) CHECK(init[i] == b.params[i]);
}

TEST_CASE("training is deterministic and ignores the test split") {
    DatasetSplit data = small_split();
    const ModelConfig m = small_model();
    const ModelBundle a = train(data, m, short_training(6));
    const ModelBundle b = train(data, m, short_training(6));
    REQUIRE(a.meta.loss_curve.size() == 6);
    CHECK(a.meta.loss_curve == b.meta.loss_curve);
    for (int i = 0; i < a.params.size(); ++i) CHECK(a.params[i] == b.params[i]);

    // Poisoned test objects would throw or change the result if they were read.
    for (auto& o : data.test) {
        o.series.values.setConstant(std::numeric_limits<double>::quiet_NaN());
        o.ew.labels.assign(o.ew.labels.size(), 99);
    }
    const ModelBundle c = train(data, m, short_training(6));
    CHECK(c.meta.loss_curve == a.meta.loss_curve);
}

TEST_CASE("training rejects bad input") {
    DatasetSplit data = small_split();
    CHECK_THROWS(train(DatasetSplit{}, small_model(), short_training(1)));
    TrainConfig bad = short_training(1);
    bad.batch_size = 0;
    CHECK_THROWS(train(data, small_model(), bad));
    bad = short_training(1);
    bad.lr = 0;
    CHECK_THROWS(train(data, small_model(), bad));
    data.train[0].series.values(3, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS(train(data, small_model(), short_training(1)));
}

TEST_CASE("inference on an untrained bundle has the right shape") {
    const DatasetSplit data = small_split();
    const ModelBundle b = train(data, small_model(), short_training(0));
    const OrbitSeries& x = data.test.front().series;
    const InferResult r = infer(b, x, 0, 0, true);
    CHECK(r.labels.size() == static_cast<std::size_t>(x.length()));
    CHECK(r.probabilities.rows() == x.length());
    CHECK((r.probabilities.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-6);
    for (int l : r.labels) CHECK((l >= 0 && l < b.model.vocab.size()));
    REQUIRE(r.snapshot_steps.size() == 6);
    CHECK(r.snapshot_steps.front() == 50);
    CHECK(r.snapshot_steps.back() == 0);
    CHECK(r.snapshots.back() == r.labels);

    const InferResult again = infer(b, x, 0, 0);
    CHECK(again.labels == r.labels);

    OrbitSeries empty = x;
    empty.values.resize(0, x.dims());
    empty.timestamps.clear();
    CHECK_THROWS(infer(b, empty));
}

TEST_CASE("encoder-only model predicts from the auxiliary head") {
    const DatasetSplit data = small_split();
    ModelConfig m = small_model();
    m.use_decoder = false;
    const ModelBundle b = train(data, m, short_training(3));
    CHECK(b.meta.loss_curve.size() == 3);
    const InferResult r = infer(b, data.test.front().series);
    CHECK(r.labels.size() == static_cast<std::size_t>(data.test.front().series.length()));
}

TEST_CASE("bundle save and load") {
    const DatasetSplit data = small_split();
    const ModelBundle b = train(data, small_model(), short_training(3));
    const fs::path path = temp_path("bundle.bin");
    save_bundle(b, path);

    SUBCASE("round trip is bit-identical") {
        const ModelBundle l = load_bundle(path);
        for (int i = 0; i < b.params.size(); ++i) CHECK(l.params[i] == b.params[i]);
        CHECK(l.meta.loss_curve == b.meta.loss_curve);
        const OrbitSeries& x = data.test.front().series;
        const InferResult r1 = infer(b, x, 0, 3), r2 = infer(l, x, 0, 3);
        CHECK(r1.labels == r2.labels);
        CHECK(r1.probabilities == r2.probabilities);
    }

    SUBCASE("truncated file fails its checksum") {
        const auto size = fs::file_size(path);
        fs::resize_file(path, size - 9);
        CHECK_THROWS_WITH_AS(load_bundle(path), doctest::Contains("checksum"), std::runtime_error);
    }

    SUBCASE("flipped byte fails its checksum") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(static_cast<std::streamoff>(fs::file_size(path) / 2));
        char c = 0;
        f.read(&c, 1);
        f.seekp(static_cast<std::streamoff>(fs::file_size(path) / 2));
        c = static_cast<char>(c ^ 0x5a);
        f.write(&c, 1);
        f.close();
        CHECK_THROWS_WITH_AS(load_bundle(path), doctest::Contains("checksum"), std::runtime_error);
    }

    SUBCASE("vocabulary guard") {
        CHECK_NOTHROW(check_vocab(b, PoLVocab::default_for(Direction::EW)));
        CHECK_THROWS(check_vocab(b, PoLVocab::default_for(Direction::NS)));
    }
    fs::remove(path);
}

TEST_CASE("periodic and best checkpoints") {
    const DatasetSplit data = small_split();
    TrainConfig t = short_training(4);
    t.checkpoint_every = 2;
    t.validation_fraction = 0.34;
    t.checkpoint_dir = temp_path("ckpt");
    fs::remove_all(t.checkpoint_dir);
    train(data, small_model(), t);
    CHECK(fs::exists(t.checkpoint_dir / "iter2.bin"));
    CHECK(fs::exists(t.checkpoint_dir / "iter4.bin"));
    CHECK(fs::exists(t.checkpoint_dir / "best.bin"));
    CHECK_NOTHROW(load_bundle(t.checkpoint_dir / "best.bin"));
    fs::remove_all(t.checkpoint_dir);
}

TEST_CASE("model configuration round trips through JSON") {
    ModelConfig m = small_model(Direction::NS);
    m.loss.boundary = 0.25;
    m.use_mask = false;
    const ModelConfig r = ModelConfig::from_json(m.to_json());
    CHECK(r.to_json() == m.to_json());
    CHECK(r.vocab == m.vocab);
}

TEST_CASE("downsampling augmentation is seeded and validated") {
    const DatasetSplit data = small_split();
    TrainConfig t = short_training(6);
    t.downsample_prob = 0.5;
    const ModelBundle a = train(data, small_model(), t), b = train(data, small_model(), t);
    CHECK(a.meta.loss_curve == b.meta.loss_curve);
    const ModelBundle plain = train(data, small_model(), short_training(6));
    CHECK(a.meta.loss_curve != plain.meta.loss_curve);

    t.downsample_prob = 1.5;
    CHECK_THROWS(train(data, small_model(), t));
    t.downsample_prob = 0.5;
    t.downsample_max_hours = 2.0;
    CHECK_THROWS(train(data, small_model(), t));
}
