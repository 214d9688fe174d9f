#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "utad/core/config.hpp"
#include "utad/core/modality.hpp"

namespace utad::model {

enum class Role { Teacher, Student };

std::string_view to_string(Role r) noexcept;
std::optional<Role> parse_role(std::string_view s);

/// Width and depth of one U-Net branch.
struct GeneratorSpec {
    int depth = 4;
    int base_channels = 64;

    static GeneratorSpec from_config(const core::ExperimentConfig& cfg);

    /// Channels at a level: 0 is the full-resolution stem, `depth` the bottleneck.
    int channels_at(int level) const noexcept { return base_channels << std::min(level, 3); }
    int bottleneck_channels() const noexcept { return channels_at(depth); }
    int bottleneck_size(int resolution) const noexcept { return resolution >> depth; }
};

/// Activation compared against the teacher's fused feature during distillation.
enum class FeatureTap { Fused, GlobalEncoder };

/// Which branch pieces a generator owns.
struct BranchLayout {
    bool local_encoder = true;
    bool fusion = true;
    bool local_decoder = true;
    FeatureTap tap = FeatureTap::Fused;

    static BranchLayout teacher() { return {}; }
    static BranchLayout student(core::StudentScheme scheme);
    int fusion_inputs() const noexcept { return local_encoder ? 2 : 1; }
};

struct TranslationOutput {
    torch::Tensor whole;          // N×1×H×W in [-1, 1]
    torch::Tensor tumor;          // N×1×H×W in [-1, 1]; undefined without a local decoder
    torch::Tensor fused_feature;  // what both decoders consume
    torch::Tensor feature_tap;    // distillation tap (see FeatureTap)

    bool has_tumor() const noexcept { return tumor.defined(); }
};

struct EncoderFeatures {
    std::vector<torch::Tensor> skips;  // skips[i]: channels_at(i) at resolution H / 2^i
    torch::Tensor bottleneck;
};

/// Conditioned image → skip features and a nonnegative bottleneck.
class EncoderImpl : public torch::nn::Module {
public:
    EncoderImpl(const GeneratorSpec& spec, int in_channels);
    EncoderFeatures forward(const torch::Tensor& x);

private:
    torch::nn::Sequential stem_{nullptr};
    std::vector<torch::nn::Sequential> down_;
};
TORCH_MODULE(Encoder);

class DecoderImpl : public torch::nn::Module {
public:
    explicit DecoderImpl(const GeneratorSpec& spec);
    torch::Tensor forward(const torch::Tensor& bottleneck, const std::vector<torch::Tensor>& skips);

private:
    std::vector<torch::nn::Sequential> up_;
    std::vector<torch::nn::Sequential> merge_;
    torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(Decoder);

/// Combines branch bottlenecks into one feature of the same shape.
/// Implementations are swappable; the kind string is stored in checkpoints.
class FusionBlock : public torch::nn::Module {
public:
    virtual torch::Tensor forward(const std::vector<torch::Tensor>& features) = 0;
    virtual std::string kind() const = 0;
};

/// Channel concatenation followed by two 1×1 mixing convolutions with a ReLU between.
class ConcatMixFusion : public FusionBlock {
public:
    ConcatMixFusion(int channels, int inputs);
    torch::Tensor forward(const std::vector<torch::Tensor>& features) override;
    std::string kind() const override { return "concat-mix-v1"; }

    torch::nn::Conv2d& mix_in() { return mix_in_; }
    torch::nn::Conv2d& mix_out() { return mix_out_; }

private:
    int channels_;
    int inputs_;
    torch::nn::Conv2d mix_in_{nullptr};
    torch::nn::Conv2d mix_out_{nullptr};
};

std::shared_ptr<FusionBlock> make_fusion(std::string_view kind, int channels, int inputs);

/// Two encoder-decoder branches around a fusion block, conditioned on the target
/// modality by four constant one-hot planes appended to each branch input.
class GeneratorImpl : public torch::nn::Module {
public:
    GeneratorImpl(const GeneratorSpec& spec, const BranchLayout& layout, std::string_view fusion_kind = "concat-mix-v1");

    /// `local_in` is ignored (may be undefined) when the layout has no local encoder.
    /// `target` is an N×4 one-hot float tensor.
    TranslationOutput forward(const torch::Tensor& global_in, const torch::Tensor& local_in, const torch::Tensor& target);

    const GeneratorSpec& spec() const noexcept { return spec_; }
    const BranchLayout& layout() const noexcept { return layout_; }
    std::shared_ptr<FusionBlock> fusion() const { return fusion_; }

private:
    GeneratorSpec spec_;
    BranchLayout layout_;
    Encoder global_encoder_{nullptr};
    Encoder local_encoder_{nullptr};
    std::shared_ptr<FusionBlock> fusion_;
    Decoder global_decoder_{nullptr};
    Decoder local_decoder_{nullptr};
};
TORCH_MODULE(Generator);

/// Mask-guided translation: global branch sees I_src, local branch sees T_src.
TranslationOutput teacher_forward(Generator& g, const torch::Tensor& image, const torch::Tensor& tumor_image,
                                  const torch::Tensor& target);
/// Mask-free translation: every present branch sees I_src.
TranslationOutput student_forward(Generator& g, const torch::Tensor& image, const torch::Tensor& target);

struct CriticSpec {
    int channels = 64;
    int layers = 3;
    int resolution = 128;  // input side; the classifier spans the whole patch map

    static CriticSpec from_config(const core::ExperimentConfig& cfg);
    int channels_at(int layer) const noexcept { return channels << std::min(layer, 3); }
    /// Side of the patch map for a square input of side `resolution`.
    int map_size() const noexcept { return resolution >> layers; }
};

struct CriticOutput {
    torch::Tensor src_map;     // N×1×h×w, unbounded
    torch::Tensor cls_logits;  // N×4

    /// Per-sample critic value: mean over the patch map.
    torch::Tensor score() const { return src_map.mean({1, 2, 3}); }
};

/// PatchGAN critic with a realness map head and a modality classifier whose
/// kernel covers the full feature map.
class CriticImpl : public torch::nn::Module {
public:
    explicit CriticImpl(const CriticSpec& spec);
    CriticOutput forward(const torch::Tensor& x);

private:
    CriticSpec spec_;
    torch::nn::Sequential trunk_{nullptr};
    torch::nn::Conv2d src_head_{nullptr};
    torch::nn::Conv2d cls_head_{nullptr};
};
TORCH_MODULE(Critic);

using NamedTensors = std::vector<std::pair<std::string, torch::Tensor>>;

/// Generator plus its critics for one role.
struct NetworkSet {
    Role role = Role::Teacher;
    core::StudentScheme scheme = core::StudentScheme::A;
    GeneratorSpec generator_spec;
    CriticSpec critic_spec;
    Generator generator{nullptr};
    Critic global_critic{nullptr};
    Critic local_critic{nullptr};  // null when the generator emits no tumor image

    /// Builds freshly initialized networks; initialization draws from torch's
    /// global generator reseeded with `init_seed`.
    static NetworkSet create(const core::ExperimentConfig& cfg, Role role, std::uint64_t init_seed);

    BranchLayout layout() const { return role == Role::Teacher ? BranchLayout::teacher() : BranchLayout::student(scheme); }
    bool has_local() const noexcept { return static_cast<bool>(local_critic); }

    /// Parameters and buffers, prefixed "generator.", "critic_g.", "critic_l.".
    NamedTensors named_tensors() const;
    void train(bool on = true);
    void eval() { train(false); }
};

std::int64_t parameter_count(const torch::nn::Module& m);

}  // namespace utad::model
