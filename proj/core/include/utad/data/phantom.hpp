#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <array>

#include "utad/data/volume.hpp"

namespace utad::data {

struct PhantomOptions {
    std::uint64_t seed = 0;
    int subjects = 12;
    int depth = 16;
    int height = 64;
    int width = 64;
    Spacing spacing{2.0, 1.0, 1.0};
    double noise = 0.01;  // Gaussian noise std inside the brain, relative to the tissue scale
};

/// Synthetic subject: four co-registered modality volumes and one BRATS label volume.
struct PhantomSubject {
    std::string subject_id;
    std::array<Volume, core::kNumModalities> modalities;
    Volume labels;
};

/// Subject name for index i: "Phantom_001", ...
std::string phantom_subject_id(int index);

/// Builds subject `index` deterministically from (seed, index).
///
/// Anatomy: an ellipsoidal brain with a folded grey/white boundary, two ventricles,
/// and a tumor with a necrotic core (label 1), enhancing rim (4) and edema (2).
/// Each modality maps the six tissues to its own intensities (tumor bright in T2
/// and Flair, enhancing rim bright in T1ce) modulated by a smooth anatomical
/// texture shared across modalities. Background is exactly zero.
PhantomSubject make_phantom_subject(const PhantomOptions& options, int index);

/// Writes `options.subjects` subjects into `root` in the BRATS layout and returns
/// their ids. Throws Error when `root` cannot be created or written.
std::vector<std::string> generate_phantom(const PhantomOptions& options, const std::filesystem::path& root);

}  // namespace utad::data
