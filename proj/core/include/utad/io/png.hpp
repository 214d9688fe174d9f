#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "utad/core/image.hpp"

namespace utad::io {

/// 8-bit RGB raster used to assemble qualitative grids.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

    RgbImage() = default;
    RgbImage(int w, int h, std::uint8_t fill = 0) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, fill) {}

    void set(int row, int col, std::uint8_t r, std::uint8_t g, std::uint8_t b);

    /// Draws `img` with its top-left corner at (row, col), mapping [lo, hi] to
    /// black..white; each source pixel becomes a scale×scale block. Clips at the border.
    void paste_gray(const core::ImageSlice& img, int row, int col, double lo, double hi, int scale = 1);
    /// Same placement, colored with a black→red→yellow→white heat ramp.
    void paste_heat(const core::ImageSlice& img, int row, int col, double lo, double hi, int scale = 1);
};

/// Throws utad::Error when the file cannot be written.
void write_png(const std::filesystem::path& path, const RgbImage& image);
RgbImage read_png(const std::filesystem::path& path);

}  // namespace utad::io
