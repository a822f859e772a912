#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "spectra/error.hpp"
#include "spectra/rng.hpp"
#include "spectra/synthgeo.hpp"

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

}  // namespace

TEST_CASE("spectral signatures are in [0,1] and ordered by class at every band") {
    for (const auto& name : modality_names()) {
        const ModalityDef mod = modality_by_name(name);
        for (double lambda : mod.lambdas) {
            double prev = -1.0;
            for (int k = 0; k < 8; ++k) {
                const double s = spectral_signature(k, lambda);
                CHECK(s >= 0.0);
                CHECK(s <= 1.0);
                CHECK(s > prev);  // strictly increasing in class index
                prev = s;
            }
        }
    }
}

TEST_CASE("modality table matches the declared channel counts") {
    CHECK(modality_by_name("rgb").channels() == 3);
    CHECK(modality_by_name("msi12").channels() == 12);
    CHECK(modality_by_name("sar2").channels() == 2);
    CHECK(modality_by_name("hyper32").channels() == 32);
    CHECK(modality_by_name("elevation1").channels() == 1);
    CHECK(modality_by_name("ir1").channels() == 1);
    CHECK_THROWS_AS(modality_by_name("thermal9"), Error);
}

TEST_CASE("noiseless single-class scenes render constant channels") {
    Scene scene;
    scene.seed = 99;
    scene.size = 16;
    scene.class_map.assign(16 * 16, 4);
    scene.elevation_m = Tensor::full({16, 16}, class_base_elevation(4));

    ModalityDef quiet = modality_by_name("rgb");
    quiet.noise_sigma = 0.0;
    MultimodalImage img = render(scene, quiet);
    for (int c = 0; c < 3; ++c) {
        const double expect = spectral_signature(4, quiet.lambdas[static_cast<std::size_t>(c)]);
        for (int p = 0; p < 256; ++p) {
            CHECK(img.pixels[static_cast<std::size_t>(c) * 256 + p] == expect);
        }
    }
}

TEST_CASE("rendering is bitwise deterministic in the scene seed") {
    Scene scene = build_scene({1234, 32});
    MultimodalImage a = render(scene, modality_by_name("msi12"));
    MultimodalImage b = render(scene, modality_by_name("msi12"));
    CHECK(max_abs_diff(a.pixels, b.pixels) == 0.0);
    validate_image(a);

    Scene other = build_scene({1235, 32});
    MultimodalImage c = render(other, modality_by_name("msi12"));
    CHECK(max_abs_diff(a.pixels, c.pixels) > 0.0);
}

TEST_CASE("per-class mean ordering is mirrored across modalities of one scene") {
    Scene scene = build_scene({777, 64});
    const auto present = class_percentages(scene.class_map, 64, 64);

    auto class_means = [&](const MultimodalImage& img) {
        std::vector<double> mean;
        std::vector<std::size_t> count;
        mean.assign(8, 0.0);
        count.assign(8, 0);
        const int hw = 64 * 64;
        for (int p = 0; p < hw; ++p) {
            const int k = scene.class_map[static_cast<std::size_t>(p)];
            double v = 0.0;
            for (int c = 0; c < img.channels(); ++c) v += img.pixels[static_cast<std::size_t>(c) * hw + p];
            mean[static_cast<std::size_t>(k)] += v / img.channels();
            ++count[static_cast<std::size_t>(k)];
        }
        std::vector<std::pair<int, double>> out;
        for (const auto& [k, pct] : present) {
            out.emplace_back(k, mean[static_cast<std::size_t>(k)] / count[static_cast<std::size_t>(k)]);
        }
        return out;
    };

    auto order_of = [&](const MultimodalImage& img) {
        auto means = class_means(img);
        std::stable_sort(means.begin(), means.end(),
                         [](const auto& a, const auto& b) { return a.second < b.second; });
        std::vector<int> order;
        for (const auto& [k, m] : means) order.push_back(k);
        return order;
    };

    const std::vector<int> rgb_order = order_of(render(scene, modality_by_name("rgb")));
    for (const auto& name : {"msi12", "sar2", "hyper32", "elevation1", "ir1"}) {
        CHECK(order_of(render(scene, modality_by_name(name))) == rgb_order);
    }
}

TEST_CASE("class_percentages sums to 100 and matches brute-force counting") {
    Rng rng(11, "masks");
    for (int trial = 0; trial < 50; ++trial) {
        const int h = 2 + rng.uniform_int(0, 14), w = 2 + rng.uniform_int(0, 14);
        std::vector<int> mask(static_cast<std::size_t>(h) * w);
        for (auto& v : mask) v = rng.uniform_int(0, 7);
        const auto result = class_percentages(mask, h, w);

        double total = 0.0;
        for (const auto& [k, pct] : result) total += pct;
        CHECK(std::fabs(total - 100.0) < 1e-9);

        for (const auto& [k, pct] : result) {
            std::size_t count = 0;
            for (int v : mask) count += v == k ? 1 : 0;
            CHECK(pct == doctest::Approx(100.0 * count / (h * w)).epsilon(1e-12));
        }
        for (std::size_t i = 1; i < result.size(); ++i) {
            CHECK(result[i - 1].second >= result[i].second);
        }
    }

    std::vector<int> uniform(36, 5);
    const auto single = class_percentages(uniform, 6, 6);
    REQUIRE(single.size() == 1);
    CHECK(single[0].first == 5);
    CHECK(single[0].second == 100.0);

    std::vector<int> half(16, 0);
    for (int y = 0; y < 4; ++y) {
        for (int x = 2; x < 4; ++x) half[static_cast<std::size_t>(y) * 4 + x] = 3;
    }
    const auto halves = class_percentages(half, 4, 4);
    REQUIRE(halves.size() == 2);
    CHECK(halves[0].second == 50.0);
    CHECK(halves[1].second == 50.0);
    CHECK(halves[0].first == 0);  // percent tie breaks to the lower class id
}

TEST_CASE("flood_stats handles empty, quarter, and random masks") {
    std::vector<std::uint8_t> empty(64, 0);
    FloodStats none = flood_stats(empty, 8, 8);
    CHECK(none.percent == 0.0);
    CHECK(none.quadrant_names().empty());

    // Top-left quarter flooded: exactly 25%, present in top and left halves.
    std::vector<std::uint8_t> quarter(64, 0);
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 4; ++x) quarter[static_cast<std::size_t>(y) * 8 + x] = 1;
    }
    FloodStats q = flood_stats(quarter, 8, 8);
    CHECK(q.percent == 25.0);
    CHECK(q.top);
    CHECK(q.left);
    CHECK(!q.bottom);
    CHECK(!q.right);
    CHECK(q.quadrant_names() == std::vector<std::string>{"top", "left"});

    Rng rng(12, "flood");
    for (int trial = 0; trial < 50; ++trial) {
        const int h = 2 + rng.uniform_int(0, 10), w = 2 + rng.uniform_int(0, 10);
        std::vector<std::uint8_t> mask(static_cast<std::size_t>(h) * w);
        for (auto& v : mask) v = rng.uniform_int(0, 1);
        FloodStats stats = flood_stats(mask, h, w);

        std::size_t count = 0;
        bool top = false, bottom = false, left = false, right = false;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (!mask[static_cast<std::size_t>(y) * w + x]) continue;
                ++count;
                top |= y < h / 2;
                bottom |= y >= h / 2;
                left |= x < w / 2;
                right |= x >= w / 2;
            }
        }
        CHECK(stats.percent == doctest::Approx(100.0 * count / (h * w)).epsilon(1e-12));
        CHECK(stats.top == top);
        CHECK(stats.bottom == bottom);
        CHECK(stats.left == left);
        CHECK(stats.right == right);
    }
}

TEST_CASE("elevation_extremes ties resolve to the first pixel in row-major order") {
    Tensor flat = Tensor::full({4, 4}, 120.0);
    std::vector<int> mask(16);
    for (int i = 0; i < 16; ++i) mask[static_cast<std::size_t>(i)] = i % 8;
    ElevationExtremes ext = elevation_extremes(flat, mask);
    CHECK(ext.h_max == 120.0);
    CHECK(ext.h_min == 120.0);
    CHECK(ext.class_at_max == 0);  // pixel (0,0)
    CHECK(ext.class_at_min == 0);

    Tensor spiked = flat;
    spiked.at2(2, 3) = 500.0;
    mask[2 * 4 + 3] = 7;
    ElevationExtremes ext2 = elevation_extremes(spiked, mask);
    CHECK(ext2.h_max == 500.0);
    CHECK(ext2.class_at_max == 7);

    Rng rng(13, "elev");
    for (int trial = 0; trial < 50; ++trial) {
        Tensor field({5, 7});
        for (std::size_t i = 0; i < field.numel(); ++i) field[i] = rng.uniform(0.0, 400.0);
        std::vector<int> classes(35);
        for (auto& v : classes) v = rng.uniform_int(0, 7);
        ElevationExtremes got = elevation_extremes(field, classes);

        double best_max = field[0], best_min = field[0];
        std::size_t idx_max = 0, idx_min = 0;
        for (std::size_t i = 1; i < field.numel(); ++i) {
            if (field[i] > best_max) { best_max = field[i]; idx_max = i; }
            if (field[i] < best_min) { best_min = field[i]; idx_min = i; }
        }
        CHECK(got.h_max == best_max);
        CHECK(got.h_min == best_min);
        CHECK(got.class_at_max == classes[idx_max]);
        CHECK(got.class_at_min == classes[idx_min]);
    }
}

TEST_CASE("caption templates produce the frozen golden strings") {
    CaptionStats lc;
    lc.sensor_word = "aerial";
    lc.landcover = {{"water", 60.0}, {"forest", 40.0}};
    CHECK(assemble_caption(CaptionKind::landcover, lc) ==
          "The aerial image contains water, forest land types. water occupies 60.0% of the image, "
          "forest occupies 40.0% of the image.");

    CaptionStats no_flood;
    CHECK(assemble_caption(CaptionKind::flood, no_flood) ==
          "This is a flood map. No flooded regions are visible in the image.");

    CaptionStats flood;
    flood.flood.percent = 25.0;
    flood.flood.top = true;
    flood.flood.left = true;
    CHECK(assemble_caption(CaptionKind::flood, flood) ==
          "This is a flood map. The flooded area occupies approximately 25.0% of the entire map. "
          "Flooded pixels are present in the top, left of the image.");

    CaptionStats elev;
    elev.extremes.h_max = 431.52;
    elev.extremes.h_min = 20.74;
    elev.class_max = "snow";
    elev.class_min = "water";
    const std::string elev_caption = assemble_caption(CaptionKind::elevation, elev);
    CHECK(elev_caption.find("431.5 meters") != std::string::npos);
    CHECK(elev_caption.find("20.7 meters") != std::string::npos);
    CHECK(elev_caption.find("snow") != std::string::npos);
    CHECK(elev_caption.find("water") != std::string::npos);

    CaptionStats obj;
    obj.sensor_word = "infrared";
    obj.dominant = "grassland";
    obj.dominant_percent = 52.25;
    CHECK(assemble_caption(CaptionKind::object, obj) ==
          "An infrared image showing grassland terrain. The dominant grassland region covers "
          "52.2% of the image.");
}

TEST_CASE("generate_manifest is byte-identical across reruns with scene-disjoint splits") {
    GenConfig cfg;
    cfg.scenes = 10;
    cfg.image_size = 16;
    cfg.modalities = {"rgb", "sar2"};
    cfg.train_fraction = 0.8;
    cfg.seed = 2024;

    const std::string dir_a = scratch_dir("gen_a");
    const std::string dir_b = scratch_dir("gen_b");
    DatasetManifest ma = generate_manifest(cfg, dir_a);
    DatasetManifest mb = generate_manifest(cfg, dir_b);

    CHECK(ma.records.size() == 20);
    CHECK(slurp(dir_a + "/manifest.jsonl") == slurp(dir_b + "/manifest.jsonl"));
    CHECK(slurp(dir_a + "/" + ma.records[0].path) == slurp(dir_b + "/" + mb.records[0].path));

    // Scene-level split: 8 train / 2 eval, and a scene never straddles splits.
    std::map<std::string, std::string> split_by_scene;
    int train_scenes = 0, eval_scenes = 0;
    for (const auto& rec : ma.records) {
        const std::string scene_key = rec.path.substr(0, rec.path.find('_', 4));
        auto it = split_by_scene.find(scene_key);
        if (it == split_by_scene.end()) {
            split_by_scene[scene_key] = rec.split;
            (rec.split == "train" ? train_scenes : eval_scenes) += 1;
        } else {
            CHECK(it->second == rec.split);
        }
    }
    CHECK(train_scenes == 8);
    CHECK(eval_scenes == 2);

    // Round-trip: reload and compare to the in-memory manifest.
    DatasetManifest loaded = load_manifest(dir_a + "/manifest.jsonl");
    REQUIRE(loaded.records.size() == ma.records.size());
    for (std::size_t i = 0; i < loaded.records.size(); ++i) {
        CHECK(loaded.records[i].caption == ma.records[i].caption);
        CHECK(loaded.records[i].labels == ma.records[i].labels);
        CHECK(loaded.records[i].split == ma.records[i].split);
    }

    // Raster round-trip at f32 precision.
    MultimodalImage img = read_raster(dir_a + "/" + ma.records[0].path);
    validate_image(img);
    CHECK(img.channels() == 3);
    const std::string copy_path = dir_a + "/copy.sgeo";
    write_raster(copy_path, img);
    CHECK(slurp(dir_a + "/" + ma.records[0].path) == slurp(copy_path));
}

TEST_CASE("raster reader rejects corrupt headers") {
    const std::string dir = scratch_dir("raster_bad");
    const std::string good_path = dir + "/x.sgeo";
    MultimodalImage img;
    img.spec = {{0.5}, "x"};
    img.pixels = Tensor::full({1, 4, 4}, 0.25);
    write_raster(good_path, img);

    std::string bytes = slurp(good_path);
    bytes[0] = 'X';
    {
        std::ofstream os(dir + "/bad_magic.sgeo", std::ios::binary);
        os << bytes;
    }
    CHECK_THROWS_AS(read_raster(dir + "/bad_magic.sgeo"), Error);

    {
        std::ofstream os(dir + "/truncated.sgeo", std::ios::binary);
        os << slurp(good_path).substr(0, 30);
    }
    CHECK_THROWS_AS(read_raster(dir + "/truncated.sgeo"), Error);
    CHECK_THROWS_AS(read_raster(dir + "/missing.sgeo"), Error);
}

TEST_CASE("captions are reproducible from scene and modality alone") {
    GenConfig cfg;
    cfg.scenes = 4;
    cfg.image_size = 16;
    cfg.modalities = {"rgb", "elevation1", "ir1"};
    cfg.seed = 31;
    const std::string dir = scratch_dir("caps");
    DatasetManifest manifest = generate_manifest(cfg, dir);
    CHECK(manifest.records.size() == 12);
    for (const auto& rec : manifest.records) {
        CHECK(!rec.caption.empty());
        CHECK(!rec.labels.empty());
        CHECK(rec.dominant == rec.labels.front());
    }
}
