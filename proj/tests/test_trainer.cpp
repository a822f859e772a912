#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "spectra/checkpoint.hpp"
#include "spectra/error.hpp"
#include "spectra/rng.hpp"
#include "spectra/synthgeo.hpp"
#include "spectra/trainer.hpp"

namespace fs = std::filesystem;
using namespace spectra;

namespace {

std::string scratch_dir(const char* name) {
    fs::path dir = fs::temp_directory_path() / "spectra_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir.string();
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is.good());
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

// A small dataset over the tiny model geometry.
std::vector<TrainRecord> tiny_records(const ModelConfig& mc, int scenes,
                                      const std::vector<std::string>& modalities) {
    GenConfig cfg;
    cfg.scenes = scenes;
    cfg.image_size = mc.vision.image_size;
    cfg.modalities = modalities;
    cfg.seed = 555;
    static int counter = 0;
    const std::string dir = scratch_dir(("trainer_data" + std::to_string(counter++)).c_str());
    DatasetManifest manifest = generate_manifest(cfg, dir);
    return load_training_records(manifest, dir, {}, "", mc.text);
}

TrainConfig tiny_train_config() {
    TrainConfig cfg;
    cfg.lr = 1e-3;
    cfg.epochs = 100;  // bounded by max_steps in the calls below
    cfg.batch = 4;
    cfg.seed = 99;
    return cfg;
}

}  // namespace

TEST_CASE("adamw leaves parameters unchanged on zero gradients without decay") {
    ParameterStore store;
    store.add("w", Tensor::from({3}, {1.0, -2.0, 3.0}));
    store.zero_grads();
    AdamState state;
    adamw_step(store, state, 1e-2, 0.0);
    CHECK(store.value("w")[0] == 1.0);
    CHECK(store.value("w")[1] == -2.0);
    CHECK(store.value("w")[2] == 3.0);
}

TEST_CASE("adamw single scalar matches two hand-computed steps") {
    ParameterStore store;
    store.add("w", Tensor::from({1}, {0.5}));
    AdamState state;
    const double lr = 0.1, wd = 0.0, b1 = 0.9, b2 = 0.999, eps = 1e-8;

    // Step 1 with gradient 0.2, worked by hand from the update rule:
    //   m = 0.1*0.2 = 0.02, v = 0.001*0.04 = 4e-5
    //   mhat = 0.02/0.1 = 0.2, vhat = 4e-5/0.001 = 0.04
    //   w = 0.5 - 0.1*0.2/(0.2 + 1e-8)
    store.grad("w")[0] = 0.2;
    adamw_step(store, state, lr, wd, b1, b2, eps);
    const double w1 = 0.5 - 0.1 * 0.2 / (0.2 + 1e-8);
    CHECK(store.value("w")[0] == doctest::Approx(w1).epsilon(1e-15));

    // Step 2 with gradient -0.1:
    //   m = 0.9*0.02 + 0.1*(-0.1) = 0.008
    //   v = 0.999*4e-5 + 0.001*0.01 = 4.996e-5
    //   mhat = 0.008/(1-0.81) = 0.008/0.19
    //   vhat = 4.996e-5/(1-0.998001)
    store.zero_grads();
    store.grad("w")[0] = -0.1;
    adamw_step(store, state, lr, wd, b1, b2, eps);
    const double m2 = 0.9 * 0.02 + 0.1 * -0.1;
    const double v2 = 0.999 * 4e-5 + 0.001 * 0.01;
    const double mhat = m2 / (1.0 - 0.81);
    const double vhat = v2 / (1.0 - 0.999 * 0.999);
    const double w2 = w1 - 0.1 * mhat / (std::sqrt(vhat) + eps);
    CHECK(store.value("w")[0] == doctest::Approx(w2).epsilon(1e-15));
}

TEST_CASE("adamw with decay and zero gradients is a pure multiplicative shrink") {
    ParameterStore store;
    store.add("w", Tensor::from({2}, {4.0, -8.0}));
    store.zero_grads();
    AdamState state;
    const double lr = 0.01, wd = 0.1;
    adamw_step(store, state, lr, wd);
    CHECK(store.value("w")[0] == doctest::Approx(4.0 * (1 - lr * wd)).epsilon(1e-15));
    CHECK(store.value("w")[1] == doctest::Approx(-8.0 * (1 - lr * wd)).epsilon(1e-15));
}

TEST_CASE("adamw skips frozen parameters and rejects non-finite gradients") {
    ParameterStore store;
    store.add("frozen", Tensor::from({1}, {2.0}), /*trainable=*/false);
    store.add("live", Tensor::from({1}, {1.0}));
    store.zero_grads();
    store.grad("frozen")[0] = 5.0;  // would move it if not frozen
    store.grad("live")[0] = 1.0;
    AdamState state;
    adamw_step(store, state, 0.1, 0.0);
    CHECK(store.value("frozen")[0] == 2.0);
    CHECK(store.value("live")[0] < 1.0);

    store.grad("live")[0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(adamw_step(store, state, 0.1, 0.0), Error);
}

TEST_CASE("checkpoint save/load/save produces byte-identical files") {
    ModelConfig mc = ModelConfig::tiny();
    StudentModel model(mc);
    model.init_params(7);

    Checkpoint ckpt = checkpoint_from_store(model.store());
    ckpt.config_hash = 0xDEADBEEF;
    ckpt.step = 42;

    const std::string dir = scratch_dir("ckpt_roundtrip");
    const std::string p1 = dir + "/a.ckpt", p2 = dir + "/b.ckpt";
    save_checkpoint(ckpt, p1);
    Checkpoint loaded = load_checkpoint(p1);
    CHECK(loaded.config_hash == 0xDEADBEEF);
    CHECK(loaded.step == 42);
    save_checkpoint(loaded, p2);
    CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("checkpoint with optimizer moments round-trips") {
    ParameterStore store;
    store.add("w", Tensor::from({2}, {0.5f, -0.25f}));
    Checkpoint ckpt = checkpoint_from_store(store);
    ckpt.has_moments = true;
    ckpt.adam_step = 17;
    MomentRecord mom;
    mom.name = "w";
    mom.shape = {2};
    mom.m = {0.125, -0.5};
    mom.v = {0.0625, 0.25};
    ckpt.moments.push_back(mom);

    const std::string dir = scratch_dir("ckpt_moments");
    save_checkpoint(ckpt, dir + "/m.ckpt");
    Checkpoint loaded = load_checkpoint(dir + "/m.ckpt");
    REQUIRE(loaded.has_moments);
    CHECK(loaded.adam_step == 17);
    REQUIRE(loaded.moments.size() == 1);
    CHECK(loaded.moments[0].m == mom.m);
    CHECK(loaded.moments[0].v == mom.v);
    save_checkpoint(loaded, dir + "/m2.ckpt");
    CHECK(slurp(dir + "/m.ckpt") == slurp(dir + "/m2.ckpt"));
}

TEST_CASE("corrupt checkpoints raise structured errors") {
    ParameterStore store;
    store.add("w", Tensor::from({2}, {1.0, 2.0}));
    const std::string dir = scratch_dir("ckpt_bad");
    save_checkpoint(checkpoint_from_store(store), dir + "/good.ckpt");

    std::string bytes = slurp(dir + "/good.ckpt");
    {
        std::string corrupted = bytes;
        corrupted[0] = 'X';
        std::ofstream os(dir + "/bad_magic.ckpt", std::ios::binary);
        os << corrupted;
    }
    CHECK_THROWS_AS(load_checkpoint(dir + "/bad_magic.ckpt"), Error);
    try {
        load_checkpoint(dir + "/bad_magic.ckpt");
    } catch (const Error& err) {
        CHECK(err.kind() == ErrorKind::format);
    }

    {
        std::ofstream os(dir + "/truncated.ckpt", std::ios::binary);
        os << bytes.substr(0, bytes.size() / 2);
    }
    CHECK_THROWS_AS(load_checkpoint(dir + "/truncated.ckpt"), Error);
    CHECK_THROWS_AS(load_checkpoint(dir + "/missing.ckpt"), Error);
}

TEST_CASE("loading mismatched names or shapes is a hard error") {
    ParameterStore a;
    a.add("w", Tensor::from({2}, {1.0, 2.0}));
    Checkpoint ckpt = checkpoint_from_store(a);

    ParameterStore renamed;
    renamed.add("w2", Tensor({2}));
    CHECK_THROWS_AS(load_into_store(ckpt, renamed), Error);

    ParameterStore reshaped;
    reshaped.add("w", Tensor({3}));
    CHECK_THROWS_AS(load_into_store(ckpt, reshaped), Error);

    ParameterStore extra;
    extra.add("w", Tensor({2}));
    extra.add("more", Tensor({1}));
    CHECK_THROWS_AS(load_into_store(ckpt, extra), Error);
}

TEST_CASE("forward outputs are preserved through a save/load cycle") {
    ModelConfig mc = ModelConfig::tiny();
    StudentModel model(mc);
    model.init_params(11);
    quantize_store_to_f32(model.store());

    std::vector<TrainRecord> records = tiny_records(mc, 3, {"rgb"});
    REQUIRE(!records.empty());
    VisionTower::Output before = model.vision().encode(model.store(), records[0].image);

    const std::string dir = scratch_dir("ckpt_forward");
    save_checkpoint(checkpoint_from_store(model.store()), dir + "/q.ckpt");

    StudentModel reloaded(mc);
    reloaded.init_params(999);  // different init, fully overwritten by the load
    load_into_store(load_checkpoint(dir + "/q.ckpt"), reloaded.store());
    VisionTower::Output after = reloaded.vision().encode(reloaded.store(), records[0].image);

    CHECK(max_abs_diff(before.embedding, after.embedding) < 1e-12);
    CHECK(max_abs_diff(before.features, after.features) < 1e-12);
}

TEST_CASE("lr = 0 leaves the checkpoint bitwise identical") {
    ModelConfig mc = ModelConfig::tiny();
    StudentModel model(mc);
    model.init_params(13);
    std::vector<TrainRecord> records = tiny_records(mc, 4, {"rgb"});

    TrainConfig cfg = tiny_train_config();
    cfg.lr = 0.0;
    TrainResult result = train(model, records, cfg, /*max_steps=*/3);
    REQUIRE(result.log.size() == 3);
    REQUIRE(result.initial.records.size() == result.trained.records.size());
    for (std::size_t i = 0; i < result.initial.records.size(); ++i) {
        CHECK(result.initial.records[i].data == result.trained.records[i].data);
    }
}

TEST_CASE("training is deterministic and decreases the loss") {
    ModelConfig mc = ModelConfig::tiny();
    std::vector<TrainRecord> records = tiny_records(mc, 6, {"rgb", "sar2"});

    TrainConfig cfg = tiny_train_config();
    auto run = [&]() {
        StudentModel model(mc);
        model.init_params(21);
        return train(model, records, cfg, /*max_steps=*/24);
    };
    TrainResult a = run();
    TrainResult b = run();

    REQUIRE(a.log.size() == 24);
    for (std::size_t i = 0; i < a.log.size(); ++i) {
        CHECK(a.log[i].total == b.log[i].total);
        CHECK(a.log[i].l_siglip == b.log[i].l_siglip);
    }
    REQUIRE(a.trained.records.size() == b.trained.records.size());
    for (std::size_t i = 0; i < a.trained.records.size(); ++i) {
        CHECK(a.trained.records[i].data == b.trained.records[i].data);
    }

    CHECK(a.log.back().total < a.log.front().total);

    // The step log round-trips through its CSV form.
    const std::string dir = scratch_dir("trainer_log");
    write_step_log(a.log, dir + "/log.csv");
    std::vector<StepLogRow> parsed = read_step_log(dir + "/log.csv");
    REQUIRE(parsed.size() == a.log.size());
    for (std::size_t i = 0; i < parsed.size(); ++i) {
        CHECK(parsed[i].total == doctest::Approx(a.log[i].total).epsilon(1e-10));
    }
}

TEST_CASE("frozen teacher checksums are unchanged by training") {
    ModelConfig mc = ModelConfig::tiny();
    StudentModel model(mc);
    model.init_params(23);
    const std::uint64_t before0 = model.teachers().at(0).checksum();
    const std::uint64_t before1 = model.teachers().at(1).checksum();
    const std::uint64_t before2 = model.teachers().at(2).checksum();

    std::vector<TrainRecord> records = tiny_records(mc, 4, {"rgb"});
    TrainConfig cfg = tiny_train_config();
    train(model, records, cfg, /*max_steps=*/6);

    CHECK(model.teachers().at(0).checksum() == before0);
    CHECK(model.teachers().at(1).checksum() == before1);
    CHECK(model.teachers().at(2).checksum() == before2);
}

TEST_CASE("train rejects empty datasets and oversized batches") {
    ModelConfig mc = ModelConfig::tiny();
    StudentModel model(mc);
    model.init_params(25);
    TrainConfig cfg = tiny_train_config();
    std::vector<TrainRecord> none;
    CHECK_THROWS_AS(train(model, none, cfg), Error);

    std::vector<TrainRecord> few = tiny_records(mc, 1, {"rgb"});
    cfg.batch = 4;
    CHECK_THROWS_AS(train(model, few, cfg), Error);
}

TEST_CASE("modality filter keywords expand correctly") {
    CHECK(expand_modality_filter("").empty());
    CHECK(expand_modality_filter("all").empty());
    CHECK(expand_modality_filter("rgb") == std::vector<std::string>{"rgb"});
    const auto others = expand_modality_filter("others");
    CHECK(others.size() == modality_names().size() - 1);
    CHECK(std::find(others.begin(), others.end(), "rgb") == others.end());
    CHECK(expand_modality_filter("rgb,ir1") == std::vector<std::string>{"rgb", "ir1"});
    CHECK_THROWS_AS(expand_modality_filter("nope"), Error);
}
