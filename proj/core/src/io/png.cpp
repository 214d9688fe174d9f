#include "utad/io/png.hpp"

#include <algorithm>
#include <cmath>
#include <array>
#include <cstring>

#include <png.h>

#include "utad/error.hpp"

namespace utad::io {

namespace {

double unit(double v, double lo, double hi) {
    if (!(hi > lo) || !std::isfinite(v)) return 0.0;
    return std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
}

template <class Color>
void paste(RgbImage& dst, const core::ImageSlice& img, int row, int col, int scale, Color color) {
    for (int r = 0; r < img.height * scale; ++r) {
        for (int c = 0; c < img.width * scale; ++c) {
            const int y = row + r, x = col + c;
            if (y < 0 || x < 0 || y >= dst.height || x >= dst.width) continue;
            const auto [cr, cg, cb] = color(img.at(r / scale, c / scale));
            dst.set(y, x, cr, cg, cb);
        }
    }
}

std::uint8_t byte(double u) { return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(u, 0.0, 1.0))); }

}  // namespace

void RgbImage::set(int row, int col, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    auto* p = &rgb[(static_cast<std::size_t>(row) * width + col) * 3];
    p[0] = r;
    p[1] = g;
    p[2] = b;
}

void RgbImage::paste_gray(const core::ImageSlice& img, int row, int col, double lo, double hi, int scale) {
    paste(*this, img, row, col, scale, [&](float v) {
        const auto g = byte(unit(v, lo, hi));
        return std::array<std::uint8_t, 3>{g, g, g};
    });
}

void RgbImage::paste_heat(const core::ImageSlice& img, int row, int col, double lo, double hi, int scale) {
    paste(*this, img, row, col, scale, [&](float v) {
        const double u = unit(v, lo, hi);
        return std::array<std::uint8_t, 3>{byte(3 * u), byte(3 * u - 1), byte(3 * u - 2)};
    });
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width);
    png.height = static_cast<png_uint_32>(image.height);
    png.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&png, path.c_str(), 0, image.rgb.data(), image.width * 3, nullptr)) {
        const std::string why = png.message;
        png_image_free(&png);
        throw Error(path.string() + ": cannot write PNG (" + why + ")");
    }
}

RgbImage read_png(const std::filesystem::path& path) {
    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.c_str())) throw Error(path.string() + ": cannot read PNG");
    png.format = PNG_FORMAT_RGB;
    RgbImage out(static_cast<int>(png.width), static_cast<int>(png.height));
    if (!png_image_finish_read(&png, nullptr, out.rgb.data(), out.width * 3, nullptr)) {
        png_image_free(&png);
        throw Error(path.string() + ": cannot decode PNG");
    }
    return out;
}

}  // namespace utad::io
