#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "utad/core/config.hpp"
#include "utad/core/image.hpp"
#include "utad/core/modality.hpp"
#include "utad/core/region.hpp"
#include "utad/core/rng.hpp"
#include "utad/data/manifest.hpp"
#include "utad/data/sample.hpp"
#include "utad/data/volume.hpp"

namespace utad::data {

/// Preprocessed, co-registered slices of one subject in all four modalities.
struct SubjectSlices {
    std::string subject_id;
    Spacing spacing;
    std::vector<int> slice_indices;
    std::array<std::vector<core::ImageSlice>, core::kNumModalities> images;  // [modality][slice], Unit space
    std::vector<core::LabelSlice> labels;                                    // [slice]

    std::size_t num_slices() const noexcept { return slice_indices.size(); }
};

struct LoadOptions {
    int resolution = 128;
    double slice_threshold = 0.01;
    double low_percentile = 0.5;
    double high_percentile = 99.5;
    int workers = 1;

    static LoadOptions from_config(const core::ExperimentConfig& cfg);
};

/// In-memory slice dataset for one split.
struct SliceDataset {
    int resolution = 0;
    std::vector<SubjectSlices> subjects;

    std::size_t num_slices() const noexcept;

    /// Loads every subject of `split`. Subjects are processed by `options.workers`
    /// parallel workers; the result order follows the manifest, not completion order.
    /// A slice is kept when its nonzero fraction reaches the threshold in every modality.
    static SliceDataset load(const DatasetManifest& manifest, Split split, const LoadOptions& options);
};

/// Loads and preprocesses one subject.
SubjectSlices load_subject(const SubjectRecord& record, const LoadOptions& options);

/// Guidance mask for one label slice. Zeros → all zero; Random → i.i.d. fair coin
/// per pixel drawn from `rng`; WT/TC/ET → composed region.
core::TumorMask guidance_mask(const core::LabelSlice& labels, core::MaskMode mode, core::Rng& rng);

/// Region evaluated for a mask mode (WT for the ablation modes).
core::TumorRegion region_of(core::MaskMode mode) noexcept;

struct SamplerItem {
    Sample sample;
    core::Modality target = core::Modality::Flair;
};

/// Stream of unpaired training samples.
///
/// At the start of every epoch each subject is assigned one source modality drawn
/// uniformly; all of its slices are emitted in that modality only, in a shuffled
/// order. Each emitted item draws its target uniformly from the other three
/// modalities. The stream is a pure function of the seed.
class UnpairedSampler {
public:
    UnpairedSampler(const SliceDataset& dataset, core::MaskMode mask_mode, std::uint64_t seed, bool augment);

    void begin_epoch();
    std::size_t epoch_size() const noexcept { return order_.size(); }
    std::size_t remaining() const noexcept { return order_.size() - cursor_; }

    /// Throws InvalidInput when the current epoch is exhausted.
    SamplerItem next();
    std::vector<SamplerItem> next_batch(std::size_t n);

    core::Rng& rng() noexcept { return rng_; }
    const core::Rng& rng() const noexcept { return rng_; }

private:
    struct Unit {
        std::size_t subject;
        std::size_t slice;
    };

    const SliceDataset* dataset_;
    core::MaskMode mask_mode_;
    bool augment_;
    core::Rng rng_;
    std::vector<core::Modality> assignment_;
    std::vector<Unit> order_;
    std::size_t cursor_ = 0;
};

}  // namespace utad::data
