#include <algorithm>
#include <array>
#include <cmath>

#include "scalpnet/error.hpp"
#include "scalpnet/image.hpp"

namespace scalpnet {

namespace {

uint8_t to_u8(double v) {
    long r = std::lround(v);  // half away from zero; samples are non-negative
    return static_cast<uint8_t>(std::clamp(r, 0L, 255L));
}

}  // namespace

RawImage resize_bilinear(const RawImage& img, int out_w, int out_h) {
    if (out_w < 1 || out_h < 1) throw Error("resize target dimensions must be >= 1");
    if (img.width < 1 || img.height < 1) throw Error("resize source image is empty");

    RawImage out;
    out.width = out_w;
    out.height = out_h;
    out.channels = img.channels;
    out.pixels.resize(static_cast<size_t>(out_w) * out_h * img.channels);

    const double sx = static_cast<double>(img.width) / out_w;
    const double sy = static_cast<double>(img.height) / out_h;
    const int c = img.channels;

    for (int y = 0; y < out_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(img.height - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, img.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(img.width - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, img.width - 1);
            const double wx = fx - x0;
            for (int ch = 0; ch < c; ++ch) {
                const double top = img.sample(y0, x0, ch) * (1.0 - wx) + img.sample(y0, x1, ch) * wx;
                const double bot = img.sample(y1, x0, ch) * (1.0 - wx) + img.sample(y1, x1, ch) * wx;
                out.sample(y, x, ch) = to_u8(top * (1.0 - wy) + bot * wy);
            }
        }
    }
    return out;
}

Tensor rescale_to_tensor(const RawImage& img) {
    const size_t h = static_cast<size_t>(img.height);
    const size_t w = static_cast<size_t>(img.width);
    Tensor out = Tensor::zeros({h, w, 3});
    float* po = out.raw();
    const size_t n = h * w;
    if (img.channels == 3) {
        for (size_t i = 0; i < n * 3; ++i) po[i] = img.pixels[i] / 255.0f;
    } else {
        for (size_t i = 0; i < n; ++i) {
            const float v = img.pixels[i] / 255.0f;
            po[i * 3] = po[i * 3 + 1] = po[i * 3 + 2] = v;
        }
    }
    return out;
}

Tensor gaussian_lowpass(const Tensor& hwc, float sigma) {
    if (!(sigma > 0.0f)) throw Error("gaussian_lowpass sigma must be > 0");
    if (hwc.rank() != 3)
        throw Error("gaussian_lowpass expects an HxWxC tensor, got " +
                    shape_to_string(hwc.shape()));

    const int h = static_cast<int>(hwc.shape()[0]);
    const int w = static_cast<int>(hwc.shape()[1]);
    const int c = static_cast<int>(hwc.shape()[2]);
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));

    // 1-D kernel; the 2-D Gaussian is its outer product, so two separable
    // passes equal the full convolution.
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
        sum += k[i + radius];
    }
    for (double& v : k) v /= sum;

    const auto clamp_x = [&](int x) { return std::clamp(x, 0, w - 1); };
    const auto clamp_y = [&](int y) { return std::clamp(y, 0, h - 1); };
    const float* pin = hwc.raw();

    // Horizontal pass.
    std::vector<float> tmp(hwc.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int ch = 0; ch < c; ++ch) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += k[i + radius] *
                           pin[(static_cast<size_t>(y) * w + clamp_x(x + i)) * c + ch];
                tmp[(static_cast<size_t>(y) * w + x) * c + ch] = static_cast<float>(acc);
            }
        }
    }

    // Vertical pass.
    Tensor out = Tensor::zeros(hwc.shape());
    float* po = out.raw();
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int ch = 0; ch < c; ++ch) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += k[i + radius] *
                           tmp[(static_cast<size_t>(clamp_y(y + i)) * w + x) * c + ch];
                po[(static_cast<size_t>(y) * w + x) * c + ch] = static_cast<float>(acc);
            }
        }
    }
    return out;
}

namespace {

// CDF remap lookup table. Returns an identity table for the degenerate
// single-bin histogram so constant images survive unchanged.
std::array<uint8_t, 256> equalize_lut(const std::array<uint64_t, 256>& hist, uint64_t total) {
    std::array<uint8_t, 256> lut{};
    for (int v = 0; v < 256; ++v) lut[v] = static_cast<uint8_t>(v);
    if (total == 0) return lut;

    double cdf_min = 0.0;
    bool found = false;
    uint64_t run = 0;
    std::array<double, 256> cdf{};
    for (int v = 0; v < 256; ++v) {
        run += hist[v];
        cdf[v] = static_cast<double>(run) / static_cast<double>(total);
        if (!found && hist[v] > 0) {
            cdf_min = cdf[v];
            found = true;
        }
    }
    if (cdf_min >= 1.0) return lut;  // all mass in one bin

    for (int v = 0; v < 256; ++v)
        lut[v] = to_u8(255.0 * (cdf[v] - cdf_min) / (1.0 - cdf_min));
    return lut;
}

}  // namespace

RawImage equalize_hist(const RawImage& img) {
    RawImage out = img;
    const size_t n = static_cast<size_t>(img.width) * img.height;
    if (n == 0) return out;

    if (img.channels == 1) {
        std::array<uint64_t, 256> hist{};
        for (uint8_t v : img.pixels) hist[v]++;
        const auto lut = equalize_lut(hist, n);
        for (size_t i = 0; i < n; ++i) out.pixels[i] = lut[img.pixels[i]];
        return out;
    }

    // Luminance histogram; chroma kept by scaling the channels with Y'/Y.
    std::vector<uint8_t> luma(n);
    std::array<uint64_t, 256> hist{};
    for (size_t i = 0; i < n; ++i) {
        const double y = 0.299 * img.pixels[i * 3] + 0.587 * img.pixels[i * 3 + 1] +
                         0.114 * img.pixels[i * 3 + 2];
        luma[i] = to_u8(y);
        hist[luma[i]]++;
    }
    const auto lut = equalize_lut(hist, n);
    for (size_t i = 0; i < n; ++i) {
        const uint8_t y = luma[i];
        if (y == 0) continue;  // no luminance to scale against
        const double factor = static_cast<double>(lut[y]) / y;
        for (int ch = 0; ch < 3; ++ch)
            out.pixels[i * 3 + ch] = to_u8(img.pixels[i * 3 + ch] * factor);
    }
    return out;
}

}  // namespace scalpnet
