#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "scalpnet/tensor.hpp"

namespace scalpnet {

// 8-bit image, row-major, interleaved channels (1 = grayscale, 3 = RGB).
struct RawImage {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<uint8_t> pixels;  // width*height*channels samples

    uint8_t sample(int y, int x, int c) const {
        return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    uint8_t& sample(int y, int x, int c) {
        return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
    }
};

// Decodes a PNG (8-bit gray/RGB/RGBA; alpha dropped, palette expanded) or
// baseline JPEG byte stream. Grayscale comes back with channels=1;
// expansion to 3 channels happens in rescale_to_tensor.
RawImage decode_image(std::span<const uint8_t> bytes);

// Encoders, used by the dataset inspector and test fixtures.
std::vector<uint8_t> encode_png(const RawImage& img);
std::vector<uint8_t> encode_jpeg(const RawImage& img, int quality = 90);

// Bilinear resize with half-pixel-centered sampling; channel count kept.
RawImage resize_bilinear(const RawImage& img, int out_w, int out_h);

// samples/255 as an H x W x 3 tensor; single-channel input is replicated
// across the three output channels.
Tensor rescale_to_tensor(const RawImage& img);

// Per-channel Gaussian smoothing, kernel radius ceil(3*sigma), replicate
// padding. Input is an H x W x C tensor.
Tensor gaussian_lowpass(const Tensor& hwc, float sigma);

// Histogram equalization via the CDF remap on luminance; chroma preserved
// by scaling R,G,B with Y'/Y. Constant images pass through unchanged.
RawImage equalize_hist(const RawImage& img);

}  // namespace scalpnet
