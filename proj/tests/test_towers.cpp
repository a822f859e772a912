#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>

#include "spectra/error.hpp"
#include "spectra/kernels.hpp"
#include "spectra/model.hpp"
#include "spectra/rng.hpp"
#include "spectra/towers.hpp"

using namespace spectra;

namespace {

MultimodalImage random_image(const std::vector<double>& lambdas, int size, std::uint64_t seed) {
    MultimodalImage img;
    img.spec = {lambdas, "test"};
    img.pixels = Tensor({static_cast<int>(lambdas.size()), size, size});
    Rng rng(seed, "img");
    for (std::size_t i = 0; i < img.pixels.numel(); ++i) img.pixels[i] = rng.uniform01();
    return img;
}

}  // namespace

TEST_CASE("tokenize is deterministic, normalizing, and bounded") {
    TextTokens a = tokenize("water water");
    CHECK(a.length == 2);
    CHECK(a.ids[0] == a.ids[1]);

    TextTokens b = tokenize("Water,");
    CHECK(b.length == 1);
    CHECK(b.ids[0] == a.ids[0]);

    std::string lengthy;
    for (int i = 0; i < 50; ++i) lengthy += "w" + std::to_string(i) + " ";
    TextTokens c = tokenize(lengthy);
    CHECK(c.length == 32);

    for (int id : c.ids) {
        CHECK(id >= 0);
        CHECK(id < 4096);
    }

    CHECK_THROWS_AS(tokenize(""), Error);
    CHECK_THROWS_AS(tokenize("..."), Error);
}

TEST_CASE("tokenize matches the frozen golden ids") {
    const char* data_dir = std::getenv("SPECTRA_TEST_DATA");
    REQUIRE(data_dir != nullptr);
    std::ifstream golden(std::string(data_dir) + "/tokenizer_golden.txt");
    REQUIRE(golden.good());
    std::string caption;
    int count = 0;
    while (std::getline(golden, caption)) {
        std::string id_line;
        REQUIRE(std::getline(golden, id_line));
        TextTokens tokens = tokenize(caption);
        std::string got;
        for (int i = 0; i < tokens.length; ++i) {
            if (i) got += " ";
            got += std::to_string(tokens.ids[static_cast<std::size_t>(i)]);
        }
        CHECK(got == id_line);
        ++count;
    }
    CHECK(count == 20);
}

TEST_CASE("text tower produces unit embeddings deterministically") {
    TextTower::Config cfg;
    cfg.dim = 16;
    cfg.blocks = 1;
    cfg.heads = 2;
    cfg.vocab = 64;
    cfg.max_tokens = 8;
    cfg.embed_dim = 8;
    TextTower tower(cfg);
    ParameterStore store;
    tower.register_params(store, 71);

    TextTokens tokens = tokenize("a small lake beside the road");
    Tensor e1 = tower.encode(store, tokens);
    Tensor e2 = tower.encode(store, tokens);
    CHECK(max_abs_diff(e1, e2) == 0.0);
    CHECK(std::fabs(l2_norm(e1) - 1.0) < 1e-9);
}

TEST_CASE("trailing ids beyond length do not affect the embedding") {
    TextTower::Config cfg;
    cfg.dim = 16;
    cfg.blocks = 1;
    cfg.heads = 2;
    cfg.vocab = 64;
    cfg.max_tokens = 8;
    cfg.embed_dim = 8;
    TextTower tower(cfg);
    ParameterStore store;
    tower.register_params(store, 72);

    TextTokens clean = tokenize("forest near water");
    TextTokens padded = clean;
    padded.ids.push_back(13);
    padded.ids.push_back(57);  // garbage beyond .length
    Tensor a = tower.encode(store, clean);
    Tensor b = tower.encode(store, padded);
    CHECK(max_abs_diff(a, b) == 0.0);
}

TEST_CASE("vision tower: unit norm, determinism, and shape across channel counts") {
    ModelConfig mc = ModelConfig::tiny();
    StudentModel model(mc);
    model.init_params(73);

    for (int c : {1, 2, 3, 12, 32, 201}) {
        std::vector<double> lambdas;
        for (int i = 0; i < c; ++i) lambdas.push_back(0.4 + 2.1 * i / std::max(1, c - 1));
        MultimodalImage img = random_image(lambdas, mc.vision.image_size, 100 + static_cast<std::uint64_t>(c));
        VisionTower::Output out = model.vision().encode(model.store(), img);
        CHECK(out.embedding.shape() == std::vector<int>{mc.vision.embed_dim});
        CHECK(std::fabs(l2_norm(out.embedding) - 1.0) < 1e-9);
        const int g = mc.vision.image_size / mc.vision.patch;
        CHECK(out.features.shape() == std::vector<int>{mc.vision.dim, g, g});

        VisionTower::Output again = model.vision().encode(model.store(), img);
        CHECK(max_abs_diff(out.embedding, again.embedding) == 0.0);
    }
}

TEST_CASE("joint channel/lambda permutation leaves the image embedding unchanged") {
    ModelConfig mc = ModelConfig::tiny();
    StudentModel model(mc);
    model.init_params(74);

    MultimodalImage img = random_image({0.44, 0.56, 0.66, 0.86}, mc.vision.image_size, 74);
    VisionTower::Output base = model.vision().encode(model.store(), img);

    const int perm[4] = {3, 1, 0, 2};
    MultimodalImage shuffled;
    shuffled.spec.modality_name = "perm";
    shuffled.pixels = Tensor(img.pixels.shape());
    const int hw = mc.vision.image_size * mc.vision.image_size;
    for (int c = 0; c < 4; ++c) {
        shuffled.spec.lambdas.push_back(img.spec.lambdas[static_cast<std::size_t>(perm[c])]);
        std::copy(img.pixels.data() + static_cast<std::size_t>(perm[c]) * hw,
                  img.pixels.data() + static_cast<std::size_t>(perm[c] + 1) * hw,
                  shuffled.pixels.data() + static_cast<std::size_t>(c) * hw);
    }
    VisionTower::Output out = model.vision().encode(model.store(), shuffled);
    CHECK(max_abs_diff(out.embedding, base.embedding) < 1e-8);
}

TEST_CASE("vision tower rejects indivisible sizes") {
    ModelConfig mc = ModelConfig::tiny();
    StudentModel model(mc);
    model.init_params(75);
    MultimodalImage img = random_image({0.5}, mc.vision.image_size + 1, 75);
    CHECK_THROWS_AS(model.vision().encode(model.store(), img), Error);
}

TEST_CASE("embedding batch validation enforces unit rows") {
    EmbeddingBatch batch;
    batch.image_embeds = Tensor::from({1, 2}, {1.0, 0.0});
    batch.text_embeds = Tensor::from({1, 2}, {0.5, 0.5});
    CHECK_THROWS_AS(validate_embedding_batch(batch), Error);
    batch.text_embeds = Tensor::from({1, 2}, {0.0, 1.0});
    validate_embedding_batch(batch);
}
