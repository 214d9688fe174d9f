#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace utad::core {

/// Intensity convention of an image. Masks are applied in Unit space, where the
/// background is exactly zero; networks consume and emit Network space.
enum class IntensitySpace {
    Unit,     // [0, 1]
    Network,  // [-1, 1]
};

constexpr double dynamic_range(IntensitySpace s) noexcept { return s == IntensitySpace::Unit ? 1.0 : 2.0; }
constexpr double range_min(IntensitySpace s) noexcept { return s == IntensitySpace::Unit ? 0.0 : -1.0; }
constexpr double range_max(IntensitySpace) noexcept { return 1.0; }
std::string_view to_string(IntensitySpace s) noexcept;

/// One 2-D single-channel image, row-major.
struct ImageSlice {
    int height = 0;
    int width = 0;
    std::vector<float> pixels;
    IntensitySpace space = IntensitySpace::Unit;

    ImageSlice() = default;
    ImageSlice(int h, int w, IntensitySpace s, float fill = 0.0f)
        : height(h), width(w), pixels(static_cast<std::size_t>(h) * w, fill), space(s) {}
    ImageSlice(int h, int w, std::vector<float> values, IntensitySpace s);

    std::size_t size() const noexcept { return pixels.size(); }
    float& at(int row, int col) { return pixels[static_cast<std::size_t>(row) * width + col]; }
    float at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * width + col]; }

    /// All entries finite and inside the declared space's range (with `slack`).
    bool valid(double slack = 0.0) const noexcept;
};

/// Throws ShapeMismatch naming `what` when the two shapes differ.
void require_same_shape(int h1, int w1, int h2, int w2, std::string_view what);

}  // namespace utad::core
