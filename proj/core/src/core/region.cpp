#include "utad/core/region.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include "utad/error.hpp"

namespace utad::core {

std::string_view to_string(TumorRegion r) noexcept {
    switch (r) {
        case TumorRegion::WT: return "WT";
        case TumorRegion::TC: return "TC";
        case TumorRegion::ET: return "ET";
    }
    return "?";
}

std::optional<TumorRegion> parse_region(std::string_view name) {
    std::string upper(name);
    std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
    if (upper == "WT") return TumorRegion::WT;
    if (upper == "TC") return TumorRegion::TC;
    if (upper == "ET") return TumorRegion::ET;
    return std::nullopt;
}

bool region_contains(TumorRegion region, std::uint8_t value) {
    switch (value) {
        case label::kBackground: return false;
        case label::kEnhancing: return true;  // ET belongs to every composite
        case label::kNcrNet: return region != TumorRegion::ET;
        case label::kEdema: return region == TumorRegion::WT;
        default: throw InvalidInput("unknown tumor label value " + std::to_string(value));
    }
}

TumorMask TumorMask::zeros(int height, int width, TumorRegion region) {
    return TumorMask{height, width, std::vector<std::uint8_t>(static_cast<std::size_t>(height) * width, 0), region};
}

TumorMask TumorMask::ones(int height, int width, TumorRegion region) {
    return TumorMask{height, width, std::vector<std::uint8_t>(static_cast<std::size_t>(height) * width, 1), region};
}

std::size_t TumorMask::count() const noexcept {
    return static_cast<std::size_t>(std::count(pixels.begin(), pixels.end(), std::uint8_t{1}));
}

bool TumorMask::is_binary() const noexcept {
    return std::all_of(pixels.begin(), pixels.end(), [](std::uint8_t v) { return v <= 1; });
}

void compose_region(std::span<const std::uint8_t> labels, TumorRegion region, std::span<std::uint8_t> out) {
    if (labels.size() != out.size()) throw ShapeMismatch("compose_region: label and output sizes differ");
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out[i] = region_contains(region, labels[i]) ? 1 : 0;
    }
}

TumorMask compose_region(const LabelSlice& labels, TumorRegion region) {
    TumorMask mask = TumorMask::zeros(labels.height, labels.width, region);
    compose_region(labels.labels, region, mask.pixels);
    return mask;
}

}  // namespace utad::core
