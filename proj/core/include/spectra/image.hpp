#pragma once

#include <string>
#include <vector>

#include "spectra/tensor.hpp"

namespace spectra {

/// Per-channel central wavelengths in micrometers, ordered like the image
/// channels they describe.
struct WavelengthSpec {
    std::vector<double> lambdas;
    std::string modality_name;

    int channels() const { return static_cast<int>(lambdas.size()); }
};

/// Validates C >= 1 and all lambdas > 0.
void validate_wavelengths(const WavelengthSpec& spec);

/// A raster plus the wavelengths of its channels; the universal model input.
/// Pixel values are expected in [0, 1] after dataset normalization.
struct MultimodalImage {
    Tensor pixels;  // (c x h x w)
    WavelengthSpec spec;

    int channels() const { return pixels.rank() == 3 ? pixels.dim(0) : 0; }
    int height() const { return pixels.rank() == 3 ? pixels.dim(1) : 0; }
    int width() const { return pixels.rank() == 3 ? pixels.dim(2) : 0; }
};

/// Checks channel/wavelength agreement and value finiteness.
void validate_image(const MultimodalImage& img);

}  // namespace spectra
