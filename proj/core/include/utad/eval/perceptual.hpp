#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "utad/core/image.hpp"

namespace utad::eval {

/// Feature stack used by the perceptual distance. Inputs are N×1×H×W in [-1, 1].
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual std::vector<torch::Tensor> features(const torch::Tensor& x) = 0;
    /// Reported next to every perceptual value.
    virtual std::string label() const = 0;
};

/// Fixed-seed random convolution stack standing in for pretrained weights.
/// Values it produces are labeled "surrogate" and are not comparable to LPIPS.
class SurrogateExtractor : public FeatureExtractor {
public:
    explicit SurrogateExtractor(std::uint64_t seed = 0x11b5);
    std::vector<torch::Tensor> features(const torch::Tensor& x) override;
    std::string label() const override { return "surrogate"; }

private:
    std::vector<torch::Tensor> weights_;
};

/// TorchScript module whose forward returns a list or tuple of feature tensors,
/// e.g. an exported LPIPS backbone.
class ScriptedExtractor : public FeatureExtractor {
public:
    explicit ScriptedExtractor(const std::filesystem::path& path);
    ~ScriptedExtractor() override;
    std::vector<torch::Tensor> features(const torch::Tensor& x) override;
    std::string label() const override { return label_; }

private:
    struct Module;
    std::unique_ptr<Module> module_;
    std::string label_;
};

/// "none" → null, "surrogate" → SurrogateExtractor, anything else is a TorchScript path.
std::shared_ptr<FeatureExtractor> make_extractor(const std::string& spec);

/// Sum over layers of the spatial mean of squared differences between
/// channel-normalized features (unit weights per channel). Unit-space images are
/// mapped to [-1, 1] first. Throws UndefinedMetric when `extractor` is null.
double perceptual_distance(const core::ImageSlice& a, const core::ImageSlice& b, FeatureExtractor* extractor);
/// Batched form for N×1×H×W [-1, 1] tensors; returns N distances.
torch::Tensor perceptual_distance(const torch::Tensor& a, const torch::Tensor& b, FeatureExtractor& extractor);

}  // namespace utad::eval
