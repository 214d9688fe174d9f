#pragma once

#include <string>

#include "utad/core/image.hpp"
#include "utad/core/modality.hpp"
#include "utad/core/region.hpp"
#include "utad/core/rng.hpp"

namespace utad::data {

/// Unpaired training unit: one slice of one subject in one modality.
struct Sample {
    std::string subject_id;
    int slice_index = 0;
    core::Modality modality = core::Modality::Flair;
    core::ImageSlice image;  // Unit space
    core::TumorMask mask;
};

/// Spatial augmentation applied identically to image and mask.
struct AugmentParams {
    bool flip = false;          // horizontal (column) flip
    double angle_degrees = 0.0;  // rotation about the image centre

    bool identity() const noexcept { return !flip && angle_degrees == 0.0; }
};

/// flip ~ Bernoulli(0.5), angle ~ U[-10°, +10°].
AugmentParams draw_augment_params(core::Rng& rng);

/// Applies the transform: image bilinear, mask bilinear then re-binarized at 0.5,
/// zero fill outside the source grid.
Sample apply_augment(const Sample& sample, const AugmentParams& params);

inline Sample augment(const Sample& sample, core::Rng& rng) { return apply_augment(sample, draw_augment_params(rng)); }

}  // namespace utad::data
