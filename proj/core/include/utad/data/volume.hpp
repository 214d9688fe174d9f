#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "utad/core/modality.hpp"
#include "utad/core/region.hpp"

namespace utad::data {

/// Voxel spacing in millimetres, slowest axis first.
struct Spacing {
    double z = 1.0;
    double y = 1.0;
    double x = 1.0;

    friend bool operator==(const Spacing&, const Spacing&) = default;
};

/// 2-D array of raw (un-normalized) intensities.
struct RawSlice {
    int height = 0;
    int width = 0;
    std::vector<float> values;
};

/// D×H×W scalar volume, z slowest, x fastest (NIfTI storage order).
struct Volume {
    int depth = 0;
    int height = 0;
    int width = 0;
    std::vector<float> voxels;
    Spacing spacing;
    std::string subject_id;
    std::optional<core::Modality> modality;

    Volume() = default;
    Volume(int d, int h, int w, Spacing s = {}, float fill = 0.0f)
        : depth(d), height(h), width(w), voxels(static_cast<std::size_t>(d) * h * w, fill), spacing(s) {}

    std::size_t index(int z, int y, int x) const noexcept {
        return (static_cast<std::size_t>(z) * height + y) * width + x;
    }
    float& at(int z, int y, int x) { return voxels[index(z, y, x)]; }
    float at(int z, int y, int x) const { return voxels[index(z, y, x)]; }
    std::size_t slice_size() const noexcept { return static_cast<std::size_t>(height) * width; }

    RawSlice slice(int z) const;
    /// Integer-valued label content of slice z (throws InvalidInput on non-integral or out-of-byte values).
    core::LabelSlice label_slice(int z) const;
    /// Whole volume converted to byte labels.
    std::vector<std::uint8_t> labels() const;
};

enum class VoxelType { Float32, UInt8 };

/// Reads a NIfTI-1 single-file image (.nii or .nii.gz). Supports the common integer
/// and floating datatypes, both byte orders, and applies scl_slope/scl_inter.
/// Throws IngestionError naming the path on a missing file, malformed header or
/// non-finite voxel.
Volume load_volume(const std::filesystem::path& path);

/// Writes a little-endian NIfTI-1 file; gzip-compressed when the name ends in ".gz".
/// Output bytes depend only on the volume content.
void save_volume(const std::filesystem::path& path, const Volume& volume, VoxelType type = VoxelType::Float32);

}  // namespace utad::data
