#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spectra/image.hpp"

namespace spectra {

// ---------------------------------------------------------------------------
// Land-cover vocabulary and per-class physical models.
// ---------------------------------------------------------------------------

/// Eight land-cover classes, index order fixed.
const std::vector<std::string>& land_cover_classes();
int land_cover_index(const std::string& name);

/// Smooth spectral signature of a class: two Gaussian bumps over wavelength
/// (one visible-range, one broad long-wave), always in [0, 1], and strictly
/// increasing in class index at every wavelength so class structure is
/// mirrored across modalities.
double spectral_signature(int class_id, double lambda_um);

/// Base elevation in meters, increasing with class index.
double class_base_elevation(int class_id);

// ---------------------------------------------------------------------------
// Scenes and modalities.
// ---------------------------------------------------------------------------

/// Declarative scene parameters; the realized Scene derives from the seed.
struct SceneSpec {
    std::uint64_t seed = 0;
    int size = 64;
};

/// Realized scene: a Voronoi class partition and an elevation field.
struct Scene {
    std::uint64_t seed = 0;
    int size = 0;
    std::vector<int> class_map;  // size*size class ids, row-major
    Tensor elevation_m;          // (size x size) meters

    int class_at(int y, int x) const { return class_map[static_cast<std::size_t>(y) * size + x]; }
};

Scene build_scene(const SceneSpec& spec);

/// A sensor family: channel wavelengths plus per-pixel noise level.
struct ModalityDef {
    std::string name;
    std::vector<double> lambdas;
    double noise_sigma = 0.0;

    int channels() const { return static_cast<int>(lambdas.size()); }
    WavelengthSpec wavelengths() const { return {lambdas, name}; }
};

/// Named modality table: rgb (3), msi12 (12), sar2 (2), hyper32 (32),
/// elevation1 (1), ir1 (1).
ModalityDef modality_by_name(const std::string& name);
const std::vector<std::string>& modality_names();

/// Deterministic render: pixel(c, y, x) = signature(class, lambda_c) + noise,
/// clamped to [0, 1]. The elevation modality renders the scene's elevation
/// field (meters / 500, clamped); its smooth noise is part of the field.
MultimodalImage render(const Scene& scene, const ModalityDef& mod);

// ---------------------------------------------------------------------------
// Caption metadata computations.
// ---------------------------------------------------------------------------

/// Coverage per present class, in percent of all pixels, ordered by
/// descending percent (ties by class id). Percentages sum to 100.
std::vector<std::pair<int, double>> class_percentages(const std::vector<int>& mask, int h, int w);

struct FloodStats {
    double percent = 0.0;
    // A half is reported when it contains at least one flooded pixel.
    bool top = false, bottom = false, left = false, right = false;

    std::vector<std::string> quadrant_names() const;
};

FloodStats flood_stats(const std::vector<std::uint8_t>& mask, int h, int w);

struct ElevationExtremes {
    double h_max = 0.0;
    int class_at_max = 0;
    double h_min = 0.0;
    int class_at_min = 0;
};

/// Row-major argmax/argmin scan (first hit wins ties).
ElevationExtremes elevation_extremes(const Tensor& elevation_m, const std::vector<int>& mask);

// ---------------------------------------------------------------------------
// Caption assembly.
// ---------------------------------------------------------------------------

enum class CaptionKind { landcover, flood, elevation, object };

struct CaptionStats {
    std::string sensor_word;  // "aerial", "multispectral", ...
    std::vector<std::pair<std::string, double>> landcover;  // descending percent
    FloodStats flood;
    ElevationExtremes extremes;
    std::string class_max, class_min;
    std::string dominant;
    double dominant_percent = 0.0;
};

/// Deterministic template fill; percentages and heights print with one
/// decimal.
std::string assemble_caption(CaptionKind kind, const CaptionStats& stats);

/// Which caption family a modality gets.
CaptionKind caption_kind_for(const std::string& modality_name);

// ---------------------------------------------------------------------------
// Dataset generation and file formats.
// ---------------------------------------------------------------------------

struct ManifestRecord {
    std::string path;  // raster path relative to the manifest
    std::string modality;
    std::string caption;
    std::vector<std::string> labels;  // present classes, descending coverage
    std::string dominant;
    std::string split;  // "train" or "eval"
};

struct DatasetManifest {
    std::vector<ManifestRecord> records;
};

struct GenConfig {
    int scenes = 100;
    int image_size = 64;
    std::vector<std::string> modalities = {"rgb", "msi12"};
    double train_fraction = 0.8;
    std::uint64_t seed = 42;
};

/// Renders every (scene, modality) pair, writes rasters plus JSON sidecars
/// and a JSON-lines manifest into out_dir. Fully determined by the config.
DatasetManifest generate_manifest(const GenConfig& config, const std::string& out_dir);

DatasetManifest load_manifest(const std::string& manifest_path);
void write_manifest(const DatasetManifest& manifest, const std::string& path);

/// Raster file: magic "SGEO1", u32 c/h/w, c little-endian f64 wavelengths,
/// then c*h*w little-endian f32 pixels.
void write_raster(const std::string& path, const MultimodalImage& img);
MultimodalImage read_raster(const std::string& path);

/// Writes an (n x m) matrix as a 1-channel raster (used for similarity dumps).
void write_matrix_raster(const std::string& path, const Tensor& matrix);
Tensor read_matrix_raster(const std::string& path);

}  // namespace spectra
