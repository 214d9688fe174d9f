#include "utad/core/image.hpp"

#include <cmath>
#include <string>

#include "utad/error.hpp"

namespace utad::core {

std::string_view to_string(IntensitySpace s) noexcept { return s == IntensitySpace::Unit ? "unit" : "network"; }

ImageSlice::ImageSlice(int h, int w, std::vector<float> values, IntensitySpace s)
    : height(h), width(w), pixels(std::move(values)), space(s) {
    if (h <= 0 || w <= 0 || pixels.size() != static_cast<std::size_t>(h) * w) {
        throw ShapeMismatch("ImageSlice: " + std::to_string(pixels.size()) + " values for shape " + std::to_string(h) +
                            "x" + std::to_string(w));
    }
}

bool ImageSlice::valid(double slack) const noexcept {
    const double lo = range_min(space) - slack;
    const double hi = range_max(space) + slack;
    for (float v : pixels) {
        if (!std::isfinite(v) || v < lo || v > hi) return false;
    }
    return true;
}

void require_same_shape(int h1, int w1, int h2, int w2, std::string_view what) {
    if (h1 != h2 || w1 != w2) {
        throw ShapeMismatch(std::string(what) + ": shape " + std::to_string(h1) + "x" + std::to_string(w1) + " vs " +
                            std::to_string(h2) + "x" + std::to_string(w2));
    }
}

}  // namespace utad::core
