#include "mvir/image_io.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

#include <png.h>

namespace mvir {

double srgb_to_linear(double v) {
    return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double v) {
    v = std::clamp(v, 0.0, 1.0);
    return v <= 0.0031308 ? v * 12.92 : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

// ---------------------------------------------------------------------------
// PFM
// ---------------------------------------------------------------------------

namespace {
struct FileCloser {
    void operator()(FILE* f) const {
        if (f)
            std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;
} // namespace

Image read_pfm(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    check(f != nullptr, "cannot open '", path, "'");
    char tag[3] = {};
    check(std::fscanf(f.get(), "%2s", tag) == 1, "bad PFM header in '", path, "'");
    int channels;
    if (std::strcmp(tag, "PF") == 0)
        channels = 3;
    else if (std::strcmp(tag, "Pf") == 0)
        channels = 1;
    else
        fail("'", path, "' is not a PFM file");
    int w, h;
    double scale;
    check(std::fscanf(f.get(), "%d %d %lf", &w, &h, &scale) == 3, "bad PFM header in '", path,
          "'");
    std::fgetc(f.get()); // single whitespace after the scale
    check(scale < 0, "big-endian PFM not supported ('", path, "')");
    check(w > 0 && h > 0, "bad PFM dimensions in '", path, "'");

    Image img(w, h, channels);
    std::vector<float> row(static_cast<size_t>(w) * channels);
    for (int y = h - 1; y >= 0; --y) { // PFM scanlines run bottom-up
        check(std::fread(row.data(), sizeof(float), row.size(), f.get()) == row.size(),
              "truncated PFM data in '", path, "'");
        for (size_t i = 0; i < row.size(); ++i)
            img.px[(static_cast<size_t>(y) * w) * channels + i] = row[i];
    }
    return img;
}

void write_pfm(const std::string& path, const Image& img) {
    check(img.channels == 1 || img.channels == 3, "PFM supports 1 or 3 channels");
    FilePtr f(std::fopen(path.c_str(), "wb"));
    check(f != nullptr, "cannot open '", path, "' for writing");
    std::fprintf(f.get(), "%s\n%d %d\n-1.0\n", img.channels == 3 ? "PF" : "Pf", img.width,
                 img.height);
    std::vector<float> row(static_cast<size_t>(img.width) * img.channels);
    for (int y = img.height - 1; y >= 0; --y) {
        for (size_t i = 0; i < row.size(); ++i)
            row[i] = static_cast<float>(
                img.px[(static_cast<size_t>(y) * img.width) * img.channels + i]);
        check(std::fwrite(row.data(), sizeof(float), row.size(), f.get()) == row.size(),
              "failed writing '", path, "'");
    }
}

// ---------------------------------------------------------------------------
// PNG
// ---------------------------------------------------------------------------

namespace {

struct PngRead {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngRead() {
        if (png)
            png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    }
};

struct PngWrite {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWrite() {
        if (png)
            png_destroy_write_struct(&png, info ? &info : nullptr);
    }
};

// Loads any PNG as 16-bit RGB rows (libpng handles expansion).
void load_png_rgb16(const std::string& path, int& w, int& h,
                    std::vector<uint16_t>& data) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    check(f != nullptr, "cannot open '", path, "'");
    PngRead p;
    p.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    check(p.png, "png_create_read_struct failed");
    p.info = png_create_info_struct(p.png);
    check(p.info, "png_create_info_struct failed");
    if (setjmp(png_jmpbuf(p.png)))
        fail("failed to decode PNG '", path, "'");
    png_init_io(p.png, f.get());
    png_read_info(p.png, p.info);

    png_set_expand(p.png);            // palettes, low bit depths, tRNS
    png_set_strip_alpha(p.png);
    png_set_gray_to_rgb(p.png);
    if (png_get_bit_depth(p.png, p.info) < 16)
        png_set_expand_16(p.png);
    png_set_swap(p.png); // little-endian samples
    png_read_update_info(p.png, p.info);

    w = static_cast<int>(png_get_image_width(p.png, p.info));
    h = static_cast<int>(png_get_image_height(p.png, p.info));
    check(png_get_channels(p.png, p.info) == 3, "unexpected channel count in '", path, "'");

    data.resize(static_cast<size_t>(w) * h * 3);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y)
        rows[y] = reinterpret_cast<png_bytep>(data.data() + static_cast<size_t>(y) * w * 3);
    png_read_image(p.png, rows.data());
    png_read_end(p.png, nullptr);
}

} // namespace

Image read_png(const std::string& path, bool linearize) {
    int w, h;
    std::vector<uint16_t> data;
    load_png_rgb16(path, w, h, data);
    Image img(w, h, 3);
    for (size_t i = 0; i < data.size(); ++i) {
        double v = data[i] / 65535.0;
        img.px[i] = linearize ? srgb_to_linear(v) : v;
    }
    return img;
}

void write_png(const std::string& path, const Image& img, int bit_depth, bool to_srgb) {
    check(bit_depth == 8 || bit_depth == 16, "PNG bit depth must be 8 or 16");
    check(img.channels == 1 || img.channels == 3, "PNG writer supports 1 or 3 channels");
    FilePtr f(std::fopen(path.c_str(), "wb"));
    check(f != nullptr, "cannot open '", path, "' for writing");
    PngWrite p;
    p.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    check(p.png, "png_create_write_struct failed");
    p.info = png_create_info_struct(p.png);
    check(p.info, "png_create_info_struct failed");
    if (setjmp(png_jmpbuf(p.png)))
        fail("failed to encode PNG '", path, "'");
    png_init_io(p.png, f.get());
    int color = img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
    png_set_IHDR(p.png, p.info, img.width, img.height, bit_depth, color,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(p.png, p.info);

    const double maxv = bit_depth == 8 ? 255.0 : 65535.0;
    size_t stride = static_cast<size_t>(img.width) * img.channels;
    if (bit_depth == 8) {
        std::vector<uint8_t> row(stride);
        for (int y = 0; y < img.height; ++y) {
            for (size_t i = 0; i < stride; ++i) {
                double v = img.px[static_cast<size_t>(y) * stride + i];
                v = to_srgb ? linear_to_srgb(v) : std::clamp(v, 0.0, 1.0);
                row[i] = static_cast<uint8_t>(std::lround(v * maxv));
            }
            png_write_row(p.png, row.data());
        }
    } else {
        std::vector<uint16_t> row(stride);
        for (int y = 0; y < img.height; ++y) {
            for (size_t i = 0; i < stride; ++i) {
                double v = img.px[static_cast<size_t>(y) * stride + i];
                v = to_srgb ? linear_to_srgb(v) : std::clamp(v, 0.0, 1.0);
                row[i] = static_cast<uint16_t>(std::lround(v * maxv));
            }
            png_set_swap(p.png);
            png_write_row(p.png, reinterpret_cast<png_bytep>(row.data()));
        }
    }
    png_write_end(p.png, nullptr);
}

MaskImage read_mask_png(const std::string& path) {
    int w, h;
    std::vector<uint16_t> data;
    load_png_rgb16(path, w, h, data);
    MaskImage m(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            // 8-bit threshold >127 scaled to the expanded 16-bit samples
            uint16_t v = data[(static_cast<size_t>(y) * w + x) * 3];
            m.set(x, y, v > 127 * 257);
        }
    return m;
}

void write_mask_png(const std::string& path, const MaskImage& mask) {
    Image img(mask.width, mask.height, 1);
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            img.at(x, y, 0) = mask.at(x, y) ? 1.0 : 0.0;
    write_png(path, img, 8, /*to_srgb=*/false);
}

} // namespace mvir
