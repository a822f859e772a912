#pragma once

#include <array>
#include <string>
#include <vector>

#include "spectra/attention.hpp"
#include "spectra/image.hpp"

namespace spectra {

/// A 3-channel view of a multimodal image for feeding teachers: channels
/// whose wavelengths are nearest to the RGB centers, cycled if fewer than
/// three channels exist.
struct RgbView {
    Tensor pixels;           // (3 x h x w)
    std::array<int, 3> source_channels{0, 0, 0};
};

/// Selects the channels nearest to (0.665, 0.560, 0.490) um in that order
/// (ties go to the lower channel index); cycles available channels when C < 3.
RgbView rgb_extract(const MultimodalImage& img);

struct TeacherConfig {
    std::string name;
    int width = 48;
    int patch = 16;
    int blocks = 2;
    int heads = 4;
    std::uint64_t seed = 9001;
};

/// Frozen, deterministic stand-in for a pretrained vision backbone: a small
/// ViT with fixed-seed random parameters. Forward only; nothing here ever
/// receives gradients.
class TeacherModel {
public:
    explicit TeacherModel(TeacherConfig cfg);

    /// Last-block tokens reshaped to (width x h/patch x w/patch).
    Tensor forward(const RgbView& view) const;

    const std::string& name() const { return cfg_.name; }
    int width() const { return cfg_.width; }
    int patch() const { return cfg_.patch; }
    /// Feature grid side for a square input of size `image_size`.
    int grid(int image_size) const { return image_size / cfg_.patch; }

    const ParameterStore& params() const { return store_; }
    std::uint64_t checksum() const { return store_.checksum(); }

private:
    TeacherConfig cfg_;
    ParameterStore store_;
    std::vector<AttentionBlock> blocks_;
};

/// Default teacher trio with distinct widths and grids so feature matching
/// always exercises real interpolation and projection.
std::vector<TeacherConfig> default_teacher_configs();

class TeacherSet {
public:
    TeacherSet() = default;
    explicit TeacherSet(const std::vector<TeacherConfig>& configs);

    std::size_t size() const { return teachers_.size(); }
    const TeacherModel& at(std::size_t i) const { return teachers_[i]; }
    const TeacherModel* find(const std::string& name) const;

private:
    std::vector<TeacherModel> teachers_;
};

}  // namespace spectra
