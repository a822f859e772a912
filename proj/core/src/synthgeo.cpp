#include "spectra/synthgeo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "spectra/error.hpp"
#include "spectra/kernels.hpp"
#include "spectra/rng.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace spectra {

const std::vector<std::string>& land_cover_classes() {
    static const std::vector<std::string> classes = {
        "water", "forest", "buildings", "crops", "bare soil", "road", "grassland", "snow"};
    return classes;
}

int land_cover_index(const std::string& name) {
    const auto& classes = land_cover_classes();
    for (std::size_t i = 0; i < classes.size(); ++i) {
        if (classes[i] == name) return static_cast<int>(i);
    }
    fail_config("unknown land-cover class '" + name + "'");
}

double spectral_signature(int class_id, double lambda_um) {
    if (class_id < 0 || class_id >= static_cast<int>(land_cover_classes().size())) {
        fail_config("spectral_signature: bad class id " + std::to_string(class_id));
    }
    // Visible bump with a slowly drifting center plus a broad long-wave bump.
    // Amplitudes grow with class index fast enough that the signature stays
    // strictly increasing in class id at every wavelength (tested).
    const double k = static_cast<double>(class_id);
    const double p = 0.08 + 0.07 * k;
    const double mu1 = 0.40 + 0.05 * k;
    const double s1 = 0.35;
    const double q = 0.06 + 0.05 * k;
    const double mu2 = 60.0;
    const double s2 = 45.0;
    const double g1 = std::exp(-(lambda_um - mu1) * (lambda_um - mu1) / (2.0 * s1 * s1));
    const double g2 = std::exp(-(lambda_um - mu2) * (lambda_um - mu2) / (2.0 * s2 * s2));
    return p * g1 + q * g2;
}

double class_base_elevation(int class_id) { return 20.0 + 55.0 * class_id; }

Scene build_scene(const SceneSpec& spec) {
    if (spec.size < 2) fail_config("scene size must be >= 2");
    Scene scene;
    scene.seed = spec.seed;
    scene.size = spec.size;

    Rng rng(spec.seed, "scene/layout");
    const int n_classes = static_cast<int>(land_cover_classes().size());
    const int n_sites = rng.uniform_int(3, 6);
    std::vector<int> class_pool(static_cast<std::size_t>(n_classes));
    for (int i = 0; i < n_classes; ++i) class_pool[static_cast<std::size_t>(i)] = i;
    rng.shuffle(class_pool);

    struct Site {
        double y, x;
        int class_id;
    };
    std::vector<Site> sites;
    for (int s = 0; s < n_sites; ++s) {
        sites.push_back({rng.uniform(0.0, spec.size), rng.uniform(0.0, spec.size),
                         class_pool[static_cast<std::size_t>(s)]});
    }

    scene.class_map.resize(static_cast<std::size_t>(spec.size) * spec.size);
    for (int y = 0; y < spec.size; ++y) {
        for (int x = 0; x < spec.size; ++x) {
            int best = 0;
            double best_d2 = 1e300;
            for (std::size_t s = 0; s < sites.size(); ++s) {
                const double dy = y + 0.5 - sites[s].y;
                const double dx = x + 0.5 - sites[s].x;
                const double d2 = dy * dy + dx * dx;
                if (d2 < best_d2) {
                    best_d2 = d2;
                    best = static_cast<int>(s);
                }
            }
            scene.class_map[static_cast<std::size_t>(y) * spec.size + x] =
                sites[static_cast<std::size_t>(best)].class_id;
        }
    }

    // Smooth elevation noise: a coarse Gaussian grid upsampled bilinearly.
    Rng elev_rng(spec.seed, "scene/elevation");
    const int coarse = 8;
    Tensor grid({1, coarse, coarse});
    for (std::size_t i = 0; i < grid.numel(); ++i) grid[i] = elev_rng.normal(0.0, 12.0);
    Tensor smooth = bilinear_resize(grid, spec.size, spec.size);

    scene.elevation_m = Tensor({spec.size, spec.size});
    for (int y = 0; y < spec.size; ++y) {
        for (int x = 0; x < spec.size; ++x) {
            const double base = class_base_elevation(scene.class_at(y, x));
            const double v = base + smooth.at3(0, y, x);
            scene.elevation_m.at2(y, x) = std::max(0.0, v);
        }
    }
    return scene;
}

const std::vector<std::string>& modality_names() {
    static const std::vector<std::string> names = {"rgb",     "msi12",      "sar2",
                                                   "hyper32", "elevation1", "ir1"};
    return names;
}

ModalityDef modality_by_name(const std::string& name) {
    if (name == "rgb") return {"rgb", {0.665, 0.560, 0.490}, 0.02};
    if (name == "msi12") {
        return {"msi12",
                {0.443, 0.490, 0.560, 0.665, 0.705, 0.740, 0.783, 0.842, 0.865, 0.945, 1.610, 2.190},
                0.02};
    }
    if (name == "sar2") return {"sar2", {100.0, 110.0}, 0.08};
    if (name == "hyper32") {
        std::vector<double> lambdas(32);
        for (int i = 0; i < 32; ++i) lambdas[static_cast<std::size_t>(i)] = 0.4 + i * (2.1 / 31.0);
        return {"hyper32", std::move(lambdas), 0.03};
    }
    // Wavelength-free modalities fall back to the RGB defaults cycled to
    // their channel count; infrared carries its thermal band center.
    if (name == "elevation1") return {"elevation1", {0.665}, 0.0};
    if (name == "ir1") return {"ir1", {10.9}, 0.03};
    fail_config("unknown modality '" + name + "'");
}

MultimodalImage render(const Scene& scene, const ModalityDef& mod) {
    const int size = scene.size;
    const int c = mod.channels();
    MultimodalImage img;
    img.spec = mod.wavelengths();
    img.pixels = Tensor({c, size, size});

    if (mod.name == "elevation1") {
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                img.pixels.at3(0, y, x) = std::clamp(scene.elevation_m.at2(y, x) / 500.0, 0.0, 1.0);
            }
        }
        return img;
    }

    Rng noise(scene.seed, "render/" + mod.name);
    for (int ch = 0; ch < c; ++ch) {
        const double lambda = mod.lambdas[static_cast<std::size_t>(ch)];
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                double v = spectral_signature(scene.class_at(y, x), lambda);
                if (mod.noise_sigma > 0.0) v += noise.normal(0.0, mod.noise_sigma);
                img.pixels.at3(ch, y, x) = std::clamp(v, 0.0, 1.0);
            }
        }
    }
    return img;
}

std::vector<std::pair<int, double>> class_percentages(const std::vector<int>& mask, int h, int w) {
    if (mask.size() != static_cast<std::size_t>(h) * w) fail_config("class_percentages: mask size mismatch");
    const int n_classes = static_cast<int>(land_cover_classes().size());
    std::vector<std::size_t> counts(static_cast<std::size_t>(n_classes), 0);
    for (int id : mask) {
        if (id < 0 || id >= n_classes) fail_config("class_percentages: invalid class id " + std::to_string(id));
        ++counts[static_cast<std::size_t>(id)];
    }
    std::vector<std::pair<int, double>> out;
    const double denom = static_cast<double>(h) * w;
    for (int id = 0; id < n_classes; ++id) {
        if (counts[static_cast<std::size_t>(id)] == 0) continue;
        out.emplace_back(id, 100.0 * static_cast<double>(counts[static_cast<std::size_t>(id)]) / denom);
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return out;
}

std::vector<std::string> FloodStats::quadrant_names() const {
    std::vector<std::string> names;
    if (top) names.emplace_back("top");
    if (bottom) names.emplace_back("bottom");
    if (left) names.emplace_back("left");
    if (right) names.emplace_back("right");
    return names;
}

FloodStats flood_stats(const std::vector<std::uint8_t>& mask, int h, int w) {
    if (mask.size() != static_cast<std::size_t>(h) * w) fail_config("flood_stats: mask size mismatch");
    FloodStats stats;
    std::size_t flooded = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask[static_cast<std::size_t>(y) * w + x]) continue;
            ++flooded;
            if (y < h / 2) stats.top = true;
            if (y >= h / 2) stats.bottom = true;
            if (x < w / 2) stats.left = true;
            if (x >= w / 2) stats.right = true;
        }
    }
    stats.percent = 100.0 * static_cast<double>(flooded) / (static_cast<double>(h) * w);
    return stats;
}

ElevationExtremes elevation_extremes(const Tensor& elevation_m, const std::vector<int>& mask) {
    const int h = elevation_m.dim(0), w = elevation_m.dim(1);
    if (mask.size() != static_cast<std::size_t>(h) * w) fail_config("elevation_extremes: mask size mismatch");
    ElevationExtremes ext;
    double best_max = elevation_m[0], best_min = elevation_m[0];
    std::size_t idx_max = 0, idx_min = 0;
    for (std::size_t i = 1; i < elevation_m.numel(); ++i) {
        if (elevation_m[i] > best_max) {
            best_max = elevation_m[i];
            idx_max = i;
        }
        if (elevation_m[i] < best_min) {
            best_min = elevation_m[i];
            idx_min = i;
        }
    }
    ext.h_max = best_max;
    ext.h_min = best_min;
    ext.class_at_max = mask[idx_max];
    ext.class_at_min = mask[idx_min];
    return ext;
}

namespace {

std::string fmt1(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    return buf;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

}  // namespace

std::string assemble_caption(CaptionKind kind, const CaptionStats& stats) {
    switch (kind) {
        case CaptionKind::landcover: {
            std::vector<std::string> names;
            for (const auto& [cls, pct] : stats.landcover) names.push_back(cls);
            std::string caption = "The " + stats.sensor_word + " image contains " +
                                  join(names, ", ") + " land types.";
            std::vector<std::string> coverage;
            for (const auto& [cls, pct] : stats.landcover) {
                coverage.push_back(cls + " occupies " + fmt1(pct) + "% of the image");
            }
            caption += " " + join(coverage, ", ") + ".";
            return caption;
        }
        case CaptionKind::flood: {
            if (stats.flood.percent <= 0.0) {
                return "This is a flood map. No flooded regions are visible in the image.";
            }
            std::string caption = "This is a flood map. The flooded area occupies approximately " +
                                  fmt1(stats.flood.percent) + "% of the entire map.";
            caption += " Flooded pixels are present in the " +
                       join(stats.flood.quadrant_names(), ", ") + " of the image.";
            return caption;
        }
        case CaptionKind::elevation: {
            return "This is an elevation map. The highest areas, at an elevation of approximately " +
                   fmt1(stats.extremes.h_max) + " meters, are " + stats.class_max +
                   ". The lowest areas, at an elevation of approximately " +
                   fmt1(stats.extremes.h_min) + " meters, are " + stats.class_min + ".";
        }
        case CaptionKind::object: {
            return "An " + stats.sensor_word + " image showing " + stats.dominant +
                   " terrain. The dominant " + stats.dominant + " region covers " +
                   fmt1(stats.dominant_percent) + "% of the image.";
        }
    }
    fail_config("assemble_caption: unknown caption kind");
}

CaptionKind caption_kind_for(const std::string& modality_name) {
    if (modality_name == "rgb" || modality_name == "msi12" || modality_name == "hyper32") {
        return CaptionKind::landcover;
    }
    if (modality_name == "sar2") return CaptionKind::flood;
    if (modality_name == "elevation1") return CaptionKind::elevation;
    if (modality_name == "ir1") return CaptionKind::object;
    fail_config("no caption kind for modality '" + modality_name + "'");
}

namespace {

std::string sensor_word_for(const std::string& modality_name) {
    if (modality_name == "rgb") return "aerial";
    if (modality_name == "msi12") return "multispectral";
    if (modality_name == "hyper32") return "hyperspectral";
    if (modality_name == "sar2") return "SAR";
    if (modality_name == "ir1") return "infrared";
    return modality_name;
}

struct SceneCaption {
    std::string caption;
    std::vector<std::string> labels;
    std::string dominant;
};

SceneCaption caption_for(const Scene& scene, const std::string& modality_name) {
    const auto& classes = land_cover_classes();
    const auto percentages = class_percentages(scene.class_map, scene.size, scene.size);

    CaptionStats stats;
    stats.sensor_word = sensor_word_for(modality_name);
    for (const auto& [id, pct] : percentages) {
        stats.landcover.emplace_back(classes[static_cast<std::size_t>(id)], pct);
    }
    stats.dominant = stats.landcover.front().first;
    stats.dominant_percent = stats.landcover.front().second;

    const CaptionKind kind = caption_kind_for(modality_name);
    if (kind == CaptionKind::flood) {
        std::vector<std::uint8_t> water(scene.class_map.size());
        const int water_id = land_cover_index("water");
        for (std::size_t i = 0; i < scene.class_map.size(); ++i) {
            water[i] = scene.class_map[i] == water_id ? 1 : 0;
        }
        stats.flood = flood_stats(water, scene.size, scene.size);
    } else if (kind == CaptionKind::elevation) {
        stats.extremes = elevation_extremes(scene.elevation_m, scene.class_map);
        stats.class_max = classes[static_cast<std::size_t>(stats.extremes.class_at_max)];
        stats.class_min = classes[static_cast<std::size_t>(stats.extremes.class_at_min)];
    }

    SceneCaption out;
    out.caption = assemble_caption(kind, stats);
    for (const auto& [cls, pct] : stats.landcover) out.labels.push_back(cls);
    out.dominant = stats.dominant;
    return out;
}

void write_u32(std::ofstream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::ifstream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_raster(const std::string& path, const MultimodalImage& img) {
    validate_image(img);
    std::ofstream os(path, std::ios::binary);
    if (!os) fail_io("cannot write raster '" + path + "'");
    os.write("SGEO1", 5);
    const int c = img.channels(), h = img.height(), w = img.width();
    write_u32(os, static_cast<std::uint32_t>(c));
    write_u32(os, static_cast<std::uint32_t>(h));
    write_u32(os, static_cast<std::uint32_t>(w));
    for (double l : img.spec.lambdas) {
        static_assert(sizeof(double) == 8);
        os.write(reinterpret_cast<const char*>(&l), 8);
    }
    for (std::size_t i = 0; i < img.pixels.numel(); ++i) {
        const float f = static_cast<float>(img.pixels[i]);
        os.write(reinterpret_cast<const char*>(&f), 4);
    }
    if (!os) fail_io("short write on raster '" + path + "'");
}

MultimodalImage read_raster(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail_io("cannot open raster '" + path + "'");
    char magic[5];
    is.read(magic, 5);
    if (!is || std::memcmp(magic, "SGEO1", 5) != 0) {
        fail_format("raster '" + path + "': bad magic");
    }
    const std::uint32_t c = read_u32(is), h = read_u32(is), w = read_u32(is);
    if (!is || c == 0 || h == 0 || w == 0 || c > 100000 || h > 100000 || w > 100000) {
        fail_format("raster '" + path + "': bad header dims");
    }
    MultimodalImage img;
    img.spec.lambdas.resize(c);
    is.read(reinterpret_cast<char*>(img.spec.lambdas.data()), static_cast<std::streamsize>(8 * c));
    img.pixels = Tensor({static_cast<int>(c), static_cast<int>(h), static_cast<int>(w)});
    for (std::size_t i = 0; i < img.pixels.numel(); ++i) {
        float f;
        is.read(reinterpret_cast<char*>(&f), 4);
        img.pixels[i] = static_cast<double>(f);
    }
    if (!is) fail_format("raster '" + path + "': truncated payload");
    img.spec.modality_name = fs::path(path).stem().string();
    return img;
}

void write_matrix_raster(const std::string& path, const Tensor& matrix) {
    if (matrix.rank() != 2) fail_config("write_matrix_raster expects rank 2");
    MultimodalImage img;
    img.pixels = Tensor({1, matrix.dim(0), matrix.dim(1)});
    std::copy(matrix.data(), matrix.data() + matrix.numel(), img.pixels.data());
    img.spec.lambdas = {1.0};
    img.spec.modality_name = "matrix";
    write_raster(path, img);
}

Tensor read_matrix_raster(const std::string& path) {
    MultimodalImage img = read_raster(path);
    if (img.channels() != 1) fail_format("matrix raster '" + path + "' has multiple channels");
    Tensor m({img.height(), img.width()});
    std::copy(img.pixels.data(), img.pixels.data() + img.pixels.numel(), m.data());
    return m;
}

namespace {

ordered_json record_to_json(const ManifestRecord& rec) {
    ordered_json j;
    j["path"] = rec.path;
    j["modality"] = rec.modality;
    j["caption"] = rec.caption;
    j["labels"] = rec.labels;
    j["dominant"] = rec.dominant;
    j["split"] = rec.split;
    return j;
}

ManifestRecord record_from_json(const ordered_json& j) {
    ManifestRecord rec;
    rec.path = j.at("path").get<std::string>();
    rec.modality = j.at("modality").get<std::string>();
    rec.caption = j.at("caption").get<std::string>();
    rec.labels = j.at("labels").get<std::vector<std::string>>();
    rec.dominant = j.at("dominant").get<std::string>();
    rec.split = j.at("split").get<std::string>();
    return rec;
}

}  // namespace

void write_manifest(const DatasetManifest& manifest, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail_io("cannot write manifest '" + path + "'");
    for (const auto& rec : manifest.records) {
        os << record_to_json(rec).dump() << "\n";
    }
    if (!os) fail_io("short write on manifest '" + path + "'");
}

DatasetManifest load_manifest(const std::string& manifest_path) {
    std::ifstream is(manifest_path);
    if (!is) fail_io("cannot open manifest '" + manifest_path + "'");
    DatasetManifest manifest;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        ordered_json j = ordered_json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            fail_format("manifest '" + manifest_path + "' line " + std::to_string(line_no) +
                        ": invalid JSON");
        }
        manifest.records.push_back(record_from_json(j));
    }
    return manifest;
}

DatasetManifest generate_manifest(const GenConfig& config, const std::string& out_dir) {
    if (config.scenes < 1) fail_config("gen: scenes must be >= 1");
    if (config.train_fraction < 0.0 || config.train_fraction > 1.0) {
        fail_config("gen: train_fraction must be in [0, 1]");
    }
    if (config.modalities.empty()) fail_config("gen: no modalities requested");
    std::vector<ModalityDef> mods;
    for (const auto& name : config.modalities) mods.push_back(modality_by_name(name));

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (!fs::is_directory(out_dir)) fail_io("cannot create output dir '" + out_dir + "'");

    // Scene-level split: shuffle indices, first round(f * n) go to train.
    std::vector<int> order(static_cast<std::size_t>(config.scenes));
    for (int i = 0; i < config.scenes; ++i) order[static_cast<std::size_t>(i)] = i;
    Rng split_rng(config.seed, "split");
    split_rng.shuffle(order);
    const int n_train = static_cast<int>(std::llround(config.train_fraction * config.scenes));
    std::vector<std::string> split_of(static_cast<std::size_t>(config.scenes));
    for (int rank = 0; rank < config.scenes; ++rank) {
        split_of[static_cast<std::size_t>(order[static_cast<std::size_t>(rank)])] =
            rank < n_train ? "train" : "eval";
    }

    DatasetManifest manifest;
    for (int i = 0; i < config.scenes; ++i) {
        SceneSpec spec;
        spec.seed = Rng(config.seed, "scene/" + std::to_string(i)).next_u64();
        spec.size = config.image_size;
        const Scene scene = build_scene(spec);
        for (const auto& mod : mods) {
            const MultimodalImage img = render(scene, mod);
            char base[64];
            std::snprintf(base, sizeof(base), "img_s%04d_%s.sgeo", i, mod.name.c_str());
            const std::string raster_path = (fs::path(out_dir) / base).string();
            write_raster(raster_path, img);

            ordered_json sidecar;
            sidecar["shape"] = {img.channels(), img.height(), img.width()};
            sidecar["lambdas_um"] = img.spec.lambdas;
            sidecar["modality"] = mod.name;
            std::ofstream sos(raster_path + ".json", std::ios::binary);
            if (!sos) fail_io("cannot write sidecar for '" + raster_path + "'");
            sos << sidecar.dump(2) << "\n";

            const SceneCaption cap = caption_for(scene, mod.name);
            ManifestRecord rec;
            rec.path = base;
            rec.modality = mod.name;
            rec.caption = cap.caption;
            rec.labels = cap.labels;
            rec.dominant = cap.dominant;
            rec.split = split_of[static_cast<std::size_t>(i)];
            manifest.records.push_back(std::move(rec));
        }
    }
    write_manifest(manifest, (fs::path(out_dir) / "manifest.jsonl").string());
    return manifest;
}

}  // namespace spectra
