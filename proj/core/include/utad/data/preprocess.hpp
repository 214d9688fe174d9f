#pragma once

#include <vector>

#include "utad/core/image.hpp"
#include "utad/core/region.hpp"
#include "utad/data/volume.hpp"

namespace utad::data {

/// One selected axial slice with its labels.
struct ExtractedSlice {
    int index = 0;
    RawSlice image;
    core::LabelSlice labels;
};

/// Fraction of nonzero pixels in a raw slice.
double nonzero_fraction(const RawSlice& s) noexcept;

/// Axial slices whose nonzero fraction is at least `threshold`, in ascending order,
/// each paired with its label slice. Throws ShapeMismatch when shapes differ.
std::vector<ExtractedSlice> extract_slices(const Volume& image, const Volume& labels, double threshold = 0.01);

/// Intensity window fitted on a whole volume: values are clipped to [low, high]
/// and mapped affinely so that low → 0 and high → 1.
struct IntensityWindow {
    double low = 0.0;
    double high = 1.0;

    bool degenerate() const noexcept { return !(high > low); }
};

/// Percentile with linear interpolation between order statistics (p in [0, 100]).
double percentile(std::vector<float> values, double p);

/// Window from the volume's [low_pct, high_pct] percentiles. Percentiles 0 and 100
/// select the plain min and max.
IntensityWindow fit_intensity_window(const Volume& volume, double low_pct = 0.5, double high_pct = 99.5);

/// Clip-and-rescale to Unit space, then bilinear resize to resolution×resolution.
/// A degenerate window (constant volume) yields an all-zero slice and logs a warning.
core::ImageSlice preprocess(const RawSlice& s, const IntensityWindow& window, int resolution);

/// Bilinear resize with half-pixel centres; identity when the size is unchanged.
core::ImageSlice resize_bilinear(const core::ImageSlice& s, int height, int width);
/// Nearest-neighbour resize for label slices.
core::LabelSlice resize_nearest(const core::LabelSlice& s, int height, int width);

/// x ↦ 2x − 1. Throws InvalidInput if the slice is not a valid Unit-space image.
core::ImageSlice to_network_space(const core::ImageSlice& s);
/// x ↦ (x + 1) / 2. Throws InvalidInput if the slice is not a valid Network-space image.
core::ImageSlice from_network_space(const core::ImageSlice& s);

/// Pixel-level product of a Unit-space image and a binary mask.
core::ImageSlice make_tumor_image(const core::ImageSlice& image, const core::TumorMask& mask);

}  // namespace utad::data
