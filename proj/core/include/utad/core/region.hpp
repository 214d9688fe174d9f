#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

#include "utad/core/image.hpp"

namespace utad::core {

/// Label values of a BRATS segmentation volume.
namespace label {
inline constexpr std::uint8_t kBackground = 0;
inline constexpr std::uint8_t kNcrNet = 1;
inline constexpr std::uint8_t kEdema = 2;
inline constexpr std::uint8_t kEnhancing = 4;
}  // namespace label

/// Composite tumor region used to build guidance masks.
///   WT = ET ∪ ED ∪ NCR/NET,  TC = ET ∪ NCR/NET,  ET = ET.
enum class TumorRegion { WT, TC, ET };

std::string_view to_string(TumorRegion r) noexcept;
std::optional<TumorRegion> parse_region(std::string_view name);

/// Whether base label value `value` belongs to `region`. Throws InvalidInput for
/// values outside {0, 1, 2, 4}.
bool region_contains(TumorRegion region, std::uint8_t value);

/// Binary mask aligned with an image slice.
struct TumorMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> pixels;  // row-major, entries in {0, 1}
    TumorRegion region = TumorRegion::WT;

    static TumorMask zeros(int height, int width, TumorRegion region = TumorRegion::WT);
    static TumorMask ones(int height, int width, TumorRegion region = TumorRegion::WT);

    std::uint8_t at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * width + col]; }
    std::size_t count() const noexcept;
    bool empty() const noexcept { return count() == 0; }
    bool is_binary() const noexcept;
};

/// Per-pixel label slice as stored in segmentation volumes.
struct LabelSlice {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> labels;
};

/// Mask whose pixel is 1 iff its label belongs to `region`.
/// Throws InvalidInput on a label value outside {0, 1, 2, 4}.
TumorMask compose_region(const LabelSlice& labels, TumorRegion region);

/// Flat variant used for volumes: writes 0/1 into `out` (same length as `labels`).
void compose_region(std::span<const std::uint8_t> labels, TumorRegion region, std::span<std::uint8_t> out);

}  // namespace utad::core
