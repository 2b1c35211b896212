#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mvir/error.h"

namespace mvir {

// Row-major, top-down, channel-interleaved image of linear radiance values.
struct Image {
    int width = 0, height = 0, channels = 0;
    std::vector<double> px;

    Image() = default;
    Image(int w, int h, int c)
        : width(w), height(h), channels(c),
          px(static_cast<size_t>(w) * h * c, 0.0) {}

    double& at(int x, int y, int c) {
        return px[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    double at(int x, int y, int c) const {
        return px[(static_cast<size_t>(y) * width + x) * channels + c];
    }
};

// Binary foreground mask (1 = foreground).
struct MaskImage {
    int width = 0, height = 0;
    std::vector<uint8_t> fg;

    MaskImage() = default;
    MaskImage(int w, int h) : width(w), height(h), fg(static_cast<size_t>(w) * h, 0) {}

    bool at(int x, int y) const { return fg[static_cast<size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool v) { fg[static_cast<size_t>(y) * width + x] = v ? 1 : 0; }
    size_t count() const {
        size_t n = 0;
        for (uint8_t v : fg)
            n += v;
        return n;
    }
};

double srgb_to_linear(double v);
double linear_to_srgb(double v);

// PFM: little-endian float32, 1 or 3 channels, bottom-up scanlines.
Image read_pfm(const std::string& path);
void write_pfm(const std::string& path, const Image& img);

// PNG. `linearize` applies sRGB decoding to [0,1] samples on load.
Image read_png(const std::string& path, bool linearize);
// `bit_depth` 8 or 16; `to_srgb` applies display encoding before quantizing.
void write_png(const std::string& path, const Image& img, int bit_depth = 8,
               bool to_srgb = true);

// Masks are 8-bit PNGs; a sample > 127 marks foreground.
MaskImage read_mask_png(const std::string& path);
void write_mask_png(const std::string& path, const MaskImage& mask);

} // namespace mvir
