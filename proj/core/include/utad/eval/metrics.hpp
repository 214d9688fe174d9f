#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include <torch/torch.h>

#include "utad/core/config.hpp"
#include "utad/core/image.hpp"
#include "utad/core/region.hpp"
#include "utad/data/volume.hpp"

namespace utad::eval {

struct SsimOptions {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
};

/// Gaussian-windowed SSIM averaged over every fully contained window. The
/// dynamic range comes from the images' declared intensity space.
/// Throws ShapeMismatch on differing shapes or spaces, InvalidInput when the
/// image is smaller than the window.
double ssim(const core::ImageSlice& a, const core::ImageSlice& b, const SsimOptions& options = {});

/// Reported for identical images.
inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

/// 10·log10(range² / MSE) in dB; kInfinitePsnr when MSE is zero.
double psnr(const core::ImageSlice& a, const core::ImageSlice& b);

/// Inclusive pixel rectangle.
struct Rect {
    int row_min = 0, row_max = 0, col_min = 0, col_max = 0;

    int height() const noexcept { return row_max - row_min + 1; }
    int width() const noexcept { return col_max - col_min + 1; }
    friend bool operator==(const Rect&, const Rect&) = default;
};

/// Tight box around the nonzero pixels. Throws UndefinedMetric for an empty mask.
Rect wt_bounding_box(const core::TumorMask& mask);

/// Grows `r` to at least min_side × min_side, centred on the original box and
/// shifted or clipped to stay inside height × width.
Rect expand_rect(const Rect& r, int min_side, int height, int width);

core::ImageSlice crop(const core::ImageSlice& s, const Rect& r);

enum class LocalMetric { Ssim, Psnr };

/// Metric restricted to the WT box of `gt_wt_mask`, expanded to fit one SSIM window.
double local_metric(const core::ImageSlice& a, const core::ImageSlice& b, const core::TumorMask& gt_wt_mask,
                    LocalMetric metric, const SsimOptions& options = {});

/// Binary 3-D mask; a 2-D mask is a volume of depth 1.
struct BinaryVolume {
    int depth = 0, height = 0, width = 0;
    std::vector<std::uint8_t> voxels;  // entries in {0, 1}, z-major

    BinaryVolume() = default;
    BinaryVolume(int d, int h, int w) : depth(d), height(h), width(w), voxels(static_cast<std::size_t>(d) * h * w, 0) {}
    static BinaryVolume from_mask(const core::TumorMask& m);
    /// Region mask of a label volume. Throws InvalidInput on labels outside {0,1,2,4}.
    static BinaryVolume from_labels(const data::Volume& labels, core::TumorRegion region);

    std::size_t index(int z, int y, int x) const noexcept {
        return (static_cast<std::size_t>(z) * height + y) * width + x;
    }
    std::uint8_t at(int z, int y, int x) const { return voxels[index(z, y, x)]; }
    std::size_t count() const noexcept;
};

/// 2|a∩b| / (|a|+|b|); 1 when both are empty.
double dsc(const BinaryVolume& a, const BinaryVolume& b);

struct SurfaceDistances {
    double assd = 0;  // mm
    double hd95 = 0;  // mm
};

/// Voxels inside the mask with at least one of the six face neighbours outside
/// (positions beyond the volume count as outside).
BinaryVolume boundary(const BinaryVolume& m);

/// Distances from every boundary voxel of `from` to the nearest boundary voxel of `to`, in mm.
std::vector<double> directed_surface_distances(const BinaryVolume& from, const BinaryVolume& to, const data::Spacing& spacing);

/// ASSD is the mean and HD95 the linearly interpolated 95th percentile of both
/// directed distance sets pooled. Throws UndefinedMetric when either mask is empty.
SurfaceDistances surface_distances(const BinaryVolume& a, const BinaryVolume& b, const data::Spacing& spacing);

/// Linear-interpolation percentile (p in [0, 100]) of unsorted values.
double percentile_linear(std::vector<double> values, double p);

struct FeatureErrorResult {
    std::vector<double> error_map;  // per-channel mean absolute error
    double mae = 0;
    double mse = 0;
    core::StudentScheme scheme = core::StudentScheme::A;
};

/// Compares N×C×h×w (or C×h×w) features. Differing spatial sizes are average-pooled
/// to the smaller one; differing channel counts throw InvalidInput.
FeatureErrorResult feature_error(const torch::Tensor& teacher, const torch::Tensor& student);

/// Streaming version of feature_error over many batches.
class FeatureErrorAccumulator {
public:
    void add(const torch::Tensor& teacher, const torch::Tensor& student);
    FeatureErrorResult result(core::StudentScheme scheme) const;

private:
    std::vector<double> abs_sum_;
    double sq_sum_ = 0;
    std::int64_t per_channel_ = 0;
};

}  // namespace utad::eval
