#include "spectra/teachers.hpp"

#include <cmath>

#include "spectra/error.hpp"
#include "spectra/hypernet.hpp"
#include "spectra/kernels.hpp"

namespace spectra {

namespace {
constexpr double kRgbCenters[3] = {0.665, 0.560, 0.490};
}

RgbView rgb_extract(const MultimodalImage& img) {
    validate_image(img);
    const int c = img.channels(), h = img.height(), w = img.width();
    RgbView view;
    for (int target = 0; target < 3; ++target) {
        if (c >= 3) {
            int best = 0;
            double best_dist = std::fabs(img.spec.lambdas[0] - kRgbCenters[target]);
            for (int ch = 1; ch < c; ++ch) {
                const double dist = std::fabs(img.spec.lambdas[static_cast<std::size_t>(ch)] -
                                              kRgbCenters[target]);
                if (dist < best_dist) {
                    best_dist = dist;
                    best = ch;
                }
            }
            view.source_channels[static_cast<std::size_t>(target)] = best;
        } else {
            view.source_channels[static_cast<std::size_t>(target)] = target % c;
        }
    }
    view.pixels = Tensor({3, h, w});
    for (int target = 0; target < 3; ++target) {
        const int src = view.source_channels[static_cast<std::size_t>(target)];
        const double* in = img.pixels.data() + static_cast<std::size_t>(src) * h * w;
        double* out = view.pixels.data() + static_cast<std::size_t>(target) * h * w;
        std::copy(in, in + static_cast<std::size_t>(h) * w, out);
    }
    return view;
}

TeacherModel::TeacherModel(TeacherConfig cfg) : cfg_(std::move(cfg)) {
    const std::string prefix = "teacher." + cfg_.name;
    store_.add(prefix + ".patch.w",
               normal_init({cfg_.width, 3 * cfg_.patch * cfg_.patch}, cfg_.seed, prefix + ".patch.w"),
               /*trainable=*/false);
    store_.add(prefix + ".patch.b", normal_init({cfg_.width}, cfg_.seed, prefix + ".patch.b"),
               /*trainable=*/false);
    // Position table sized lazily would break frozen-checksum guarantees, so
    // it is fixed for a 32x32-grid upper bound and sliced per input.
    store_.add(prefix + ".pos", normal_init({1024, cfg_.width}, cfg_.seed, prefix + ".pos"),
               /*trainable=*/false);
    for (int b = 0; b < cfg_.blocks; ++b) {
        AttentionBlock block(prefix + ".block" + std::to_string(b), cfg_.width, cfg_.heads);
        block.register_params(store_, cfg_.seed);
        blocks_.push_back(std::move(block));
    }
    for (auto& e : store_.entries()) e.trainable = false;
}

Tensor TeacherModel::forward(const RgbView& view) const {
    const int h = view.pixels.dim(1), w = view.pixels.dim(2);
    const int p = cfg_.patch;
    if (h % p != 0 || w % p != 0) {
        fail_config("teacher '" + cfg_.name + "': input " + std::to_string(h) + "x" +
                    std::to_string(w) + " not divisible by patch " + std::to_string(p));
    }
    const int gh = h / p, gw = w / p;
    const int n = gh * gw;
    const std::string prefix = "teacher." + cfg_.name;
    const Tensor& pw = store_.value(prefix + ".patch.w");
    const Tensor& pb = store_.value(prefix + ".patch.b");

    // Flatten patches and apply the static embedding.
    Tensor patches({n, 3 * p * p});
    for (int gy = 0; gy < gh; ++gy) {
        for (int gx = 0; gx < gw; ++gx) {
            double* row = patches.data() + static_cast<std::size_t>(gy * gw + gx) * 3 * p * p;
            int idx = 0;
            for (int c = 0; c < 3; ++c) {
                for (int py = 0; py < p; ++py) {
                    const double* src = view.pixels.data() +
                                        (static_cast<std::size_t>(c) * h + gy * p + py) * w + gx * p;
                    for (int px = 0; px < p; ++px) row[idx++] = src[px];
                }
            }
        }
    }
    Tensor tokens = linear_forward(patches, pw, pb);

    const Tensor& pos = store_.value(prefix + ".pos");
    if (n > pos.dim(0)) fail_config("teacher '" + cfg_.name + "': grid exceeds position table");
    for (int i = 0; i < n; ++i) {
        double* tok = tokens.data() + static_cast<std::size_t>(i) * cfg_.width;
        const double* pr = pos.data() + static_cast<std::size_t>(i) * cfg_.width;
        for (int j = 0; j < cfg_.width; ++j) tok[j] += pr[j];
    }

    for (const auto& block : blocks_) tokens = block.forward(store_, tokens);

    // Tokens to (width x gh x gw).
    Tensor features({cfg_.width, gh, gw});
    for (int i = 0; i < n; ++i) {
        const double* tok = tokens.data() + static_cast<std::size_t>(i) * cfg_.width;
        for (int j = 0; j < cfg_.width; ++j) {
            features[static_cast<std::size_t>(j) * n + i] = tok[j];
        }
    }
    return features;
}

std::vector<TeacherConfig> default_teacher_configs() {
    return {
        {"siglip_t", 48, 16, 2, 4, 9001},
        {"dinov2_t", 64, 4, 1, 4, 9002},
        {"vit_t", 80, 16, 2, 4, 9003},
    };
}

TeacherSet::TeacherSet(const std::vector<TeacherConfig>& configs) {
    for (const auto& cfg : configs) teachers_.emplace_back(cfg);
}

const TeacherModel* TeacherSet::find(const std::string& name) const {
    for (const auto& t : teachers_) {
        if (t.name() == name) return &t;
    }
    return nullptr;
}

}  // namespace spectra
