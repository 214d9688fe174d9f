#include "utad/data/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "utad/error.hpp"

namespace utad::data {

using core::ImageSlice;
using core::IntensitySpace;

double nonzero_fraction(const RawSlice& s) noexcept {
    if (s.values.empty()) return 0.0;
    const auto nz = std::count_if(s.values.begin(), s.values.end(), [](float v) { return v != 0.0f; });
    return static_cast<double>(nz) / static_cast<double>(s.values.size());
}

std::vector<ExtractedSlice> extract_slices(const Volume& image, const Volume& labels, double threshold) {
    if (image.depth != labels.depth || image.height != labels.height || image.width != labels.width) {
        throw ShapeMismatch("extract_slices: image volume " + std::to_string(image.depth) + "x" +
                            std::to_string(image.height) + "x" + std::to_string(image.width) +
                            " does not match label volume " + std::to_string(labels.depth) + "x" +
                            std::to_string(labels.height) + "x" + std::to_string(labels.width));
    }
    std::vector<ExtractedSlice> out;
    for (int z = 0; z < image.depth; ++z) {
        RawSlice s = image.slice(z);
        if (nonzero_fraction(s) >= threshold && nonzero_fraction(s) > 0.0) {
            out.push_back(ExtractedSlice{z, std::move(s), labels.label_slice(z)});
        }
    }
    return out;
}

double percentile(std::vector<float> values, double p) {
    if (values.empty()) throw InvalidInput("percentile of an empty set");
    if (!(p >= 0.0 && p <= 100.0)) throw InvalidInput("percentile must lie in [0, 100]");
    const double rank = p / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const auto hi = std::min(lo + 1, values.size() - 1);
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
    const double vlo = values[lo];
    if (hi == lo) return vlo;
    const double vhi = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
    return vlo + (rank - static_cast<double>(lo)) * (vhi - vlo);
}

IntensityWindow fit_intensity_window(const Volume& volume, double low_pct, double high_pct) {
    if (!(low_pct >= 0.0 && low_pct < high_pct && high_pct <= 100.0)) {
        throw InvalidInput("fit_intensity_window: need 0 <= low < high <= 100");
    }
    return IntensityWindow{percentile(volume.voxels, low_pct), percentile(volume.voxels, high_pct)};
}

ImageSlice resize_bilinear(const ImageSlice& s, int height, int width) {
    if (height <= 0 || width <= 0) throw InvalidInput("resize: target size must be positive");
    if (s.height == height && s.width == width) return s;
    ImageSlice out(height, width, s.space);
    const double sy = static_cast<double>(s.height) / height;
    const double sx = static_cast<double>(s.width) / width;
    for (int r = 0; r < height; ++r) {
        const double fy = std::clamp((r + 0.5) * sy - 0.5, 0.0, static_cast<double>(s.height - 1));
        const int y0 = static_cast<int>(std::floor(fy));
        const int y1 = std::min(y0 + 1, s.height - 1);
        const double wy = fy - y0;
        for (int c = 0; c < width; ++c) {
            const double fx = std::clamp((c + 0.5) * sx - 0.5, 0.0, static_cast<double>(s.width - 1));
            const int x0 = static_cast<int>(std::floor(fx));
            const int x1 = std::min(x0 + 1, s.width - 1);
            const double wx = fx - x0;
            const double top = (1 - wx) * s.at(y0, x0) + wx * s.at(y0, x1);
            const double bottom = (1 - wx) * s.at(y1, x0) + wx * s.at(y1, x1);
            out.at(r, c) = static_cast<float>((1 - wy) * top + wy * bottom);
        }
    }
    return out;
}

core::LabelSlice resize_nearest(const core::LabelSlice& s, int height, int width) {
    if (height <= 0 || width <= 0) throw InvalidInput("resize: target size must be positive");
    if (s.height == height && s.width == width) return s;
    core::LabelSlice out{height, width, std::vector<std::uint8_t>(static_cast<std::size_t>(height) * width)};
    for (int r = 0; r < height; ++r) {
        const int y = std::min(static_cast<int>((r + 0.5) * s.height / height), s.height - 1);
        for (int c = 0; c < width; ++c) {
            const int x = std::min(static_cast<int>((c + 0.5) * s.width / width), s.width - 1);
            out.labels[static_cast<std::size_t>(r) * width + c] = s.labels[static_cast<std::size_t>(y) * s.width + x];
        }
    }
    return out;
}

ImageSlice preprocess(const RawSlice& s, const IntensityWindow& window, int resolution) {
    ImageSlice unit(s.height, s.width, IntensitySpace::Unit);
    if (window.degenerate()) {
        std::cerr << "[utad] warning: constant intensity window; slice mapped to zeros\n";
    } else {
        const double scale = 1.0 / (window.high - window.low);
        for (std::size_t i = 0; i < s.values.size(); ++i) {
            const double v = s.values[i];
            if (!std::isfinite(v)) throw InvalidInput("preprocess: non-finite input");
            unit.pixels[i] = static_cast<float>((std::clamp(v, window.low, window.high) - window.low) * scale);
        }
    }
    ImageSlice out = resize_bilinear(unit, resolution, resolution);
    // Bilinear weights are convex, but float rounding can overshoot by an ulp.
    for (float& v : out.pixels) v = std::clamp(v, 0.0f, 1.0f);
    return out;
}

ImageSlice to_network_space(const ImageSlice& s) {
    if (s.space != IntensitySpace::Unit || !s.valid()) {
        throw InvalidInput("to_network_space: input is not a valid [0,1] image");
    }
    ImageSlice out = s;
    out.space = IntensitySpace::Network;
    for (float& v : out.pixels) v = static_cast<float>(2.0 * v - 1.0);
    return out;
}

ImageSlice from_network_space(const ImageSlice& s) {
    if (s.space != IntensitySpace::Network || !s.valid()) {
        throw InvalidInput("from_network_space: input is not a valid [-1,1] image");
    }
    ImageSlice out = s;
    out.space = IntensitySpace::Unit;
    for (float& v : out.pixels) v = static_cast<float>((static_cast<double>(v) + 1.0) * 0.5);
    return out;
}

ImageSlice make_tumor_image(const ImageSlice& image, const core::TumorMask& mask) {
    core::require_same_shape(image.height, image.width, mask.height, mask.width, "make_tumor_image");
    if (image.space != IntensitySpace::Unit) {
        throw InvalidInput("make_tumor_image: masks are applied in [0,1] space");
    }
    ImageSlice out = image;
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        if (mask.pixels[i] == 0) out.pixels[i] = 0.0f;
    }
    return out;
}

}  // namespace utad::data
