#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "utad/core/config.hpp"
#include "utad/core/modality.hpp"
#include "utad/core/region.hpp"
#include "utad/data/dataset.hpp"
#include "utad/data/manifest.hpp"
#include "utad/eval/metrics.hpp"
#include "utad/eval/perceptual.hpp"
#include "utad/model/networks.hpp"

namespace utad::eval {

/// Mean and per-sample standard deviation (population form) of n values.
struct MeanStd {
    double mean = 0;
    double std = 0;
    std::size_t n = 0;

    static MeanStd of(const std::vector<double>& values);
};

/// Metrics of one directed modality pair; source/target are empty for the aggregate row.
struct PairMetrics {
    std::optional<core::Modality> source, target;
    std::size_t n = 0;        // slices scored
    std::size_t n_local = 0;  // slices with a nonempty WT mask
    MeanStd ssim, psnr, local_ssim, local_psnr;
    std::optional<MeanStd> perceptual;
};

/// Per-pair and aggregate image-quality metrics. All values are computed in
/// [0, 1] intensity space; "std" is the per-sample standard deviation.
struct MetricsReport {
    std::string checkpoint;
    std::string config_hash;
    std::string split;
    std::string translator;
    std::string perceptual_label = "none";
    std::vector<PairMetrics> pairs;  // 12 directed pairs, source-major canonical order
    PairMetrics aggregate;           // mean of the per-pair means

    const PairMetrics& pair(core::Modality source, core::Modality target) const;
    void write_csv(const std::filesystem::path& path) const;
    void write_json(const std::filesystem::path& path) const;
};

/// Maps an N×1×H×W network-space batch to `target`. `labels` holds each slice's
/// label map for translators that build guidance masks.
using Translator = std::function<torch::Tensor(const torch::Tensor& source, const std::vector<core::LabelSlice>& labels,
                                               core::Modality target)>;

/// Output = input; the floor every trained translator should beat.
Translator identity_translator();

/// Generator of `nets`. Teachers receive guidance masks built with `mask_mode`
/// (random masks are drawn from a stream seeded with `seed`); students ignore labels.
Translator network_translator(model::NetworkSet& nets, core::MaskMode mask_mode, std::uint64_t seed);

struct EvalOptions {
    std::shared_ptr<FeatureExtractor> extractor;                 // null: no perceptual column
    std::optional<std::filesystem::path> error_map_dir;         // PNG grids per pair when set
    int error_map_samples = 4;
    int batch_size = 16;
    SsimOptions ssim;
};

/// Translates every slice of `ds` along all 12 directed pairs and scores it
/// against the co-registered ground truth of the target modality.
MetricsReport evaluate_translation(const data::SliceDataset& ds, const Translator& translate, const EvalOptions& options);

/// Loads a checkpoint, the split it names, and evaluates its generator.
MetricsReport evaluate_checkpoint(const std::filesystem::path& checkpoint, const data::DatasetManifest& manifest,
                                  data::Split split, const EvalOptions& options);

/// Feature error between the teacher's fused feature and the student's tap over
/// every slice of `ds` and all 12 directed pairs.
FeatureErrorResult scheme_feature_error(const data::SliceDataset& ds, model::NetworkSet& teacher,
                                        core::MaskMode teacher_mask_mode, model::NetworkSet& student,
                                        int batch_size = 16, std::uint64_t seed = 0);

}  // namespace utad::eval
