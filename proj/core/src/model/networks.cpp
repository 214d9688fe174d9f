#include "utad/model/networks.hpp"

#include "utad/error.hpp"

namespace utad::model {

namespace nn = torch::nn;
constexpr std::int64_t kCond = static_cast<std::int64_t>(core::kNumModalities);

std::string_view to_string(Role r) noexcept { return r == Role::Teacher ? "teacher" : "student"; }

std::optional<Role> parse_role(std::string_view s) {
    if (s == "teacher") return Role::Teacher;
    if (s == "student") return Role::Student;
    return std::nullopt;
}

GeneratorSpec GeneratorSpec::from_config(const core::ExperimentConfig& cfg) {
    return GeneratorSpec{cfg.depth, cfg.base_channels};
}

CriticSpec CriticSpec::from_config(const core::ExperimentConfig& cfg) {
    return CriticSpec{cfg.critic_channels, cfg.critic_layers, cfg.resolution};
}

BranchLayout BranchLayout::student(core::StudentScheme scheme) {
    switch (scheme) {
        case core::StudentScheme::A: return {true, true, true, FeatureTap::Fused};
        case core::StudentScheme::B: return {false, false, false, FeatureTap::GlobalEncoder};
        case core::StudentScheme::C: return {false, true, true, FeatureTap::GlobalEncoder};
        case core::StudentScheme::D: return {true, true, false, FeatureTap::Fused};
    }
    return {};
}

namespace {

nn::Sequential conv_in_relu(int in, int out, int kernel, int stride, int padding) {
    return nn::Sequential(nn::Conv2d(nn::Conv2dOptions(in, out, kernel).stride(stride).padding(padding)),
                          nn::InstanceNorm2d(nn::InstanceNorm2dOptions(out).affine(true)), nn::ReLU());
}

nn::Sequential up_in_relu(int in, int out) {
    return nn::Sequential(nn::ConvTranspose2d(nn::ConvTranspose2dOptions(in, out, 4).stride(2).padding(1)),
                          nn::InstanceNorm2d(nn::InstanceNorm2dOptions(out).affine(true)), nn::ReLU());
}

void require_image_batch(const torch::Tensor& x, const char* what) {
    if (!x.defined() || x.dim() != 4 || x.size(1) != 1) {
        throw ShapeMismatch(std::string(what) + ": expected an N×1×H×W tensor");
    }
    if (!torch::isfinite(x).all().item<bool>()) throw InvalidInput(std::string(what) + ": non-finite input");
}

torch::Tensor condition(const torch::Tensor& x, const torch::Tensor& target) {
    const auto n = x.size(0), h = x.size(2), w = x.size(3);
    if (target.dim() != 2 || target.size(0) != n || target.size(1) != kCond) {
        throw ShapeMismatch("generator: target must be an N×4 one-hot tensor");
    }
    return torch::cat({x, target.to(x.dtype()).view({n, kCond, 1, 1}).expand({n, kCond, h, w})}, 1);
}

}  // namespace

EncoderImpl::EncoderImpl(const GeneratorSpec& spec, int in_channels) {
    stem_ = register_module("stem", conv_in_relu(in_channels, spec.channels_at(0), 3, 1, 1));
    for (int i = 0; i < spec.depth; ++i) {
        down_.push_back(register_module("down" + std::to_string(i),
                                        conv_in_relu(spec.channels_at(i), spec.channels_at(i + 1), 4, 2, 1)));
    }
}

EncoderFeatures EncoderImpl::forward(const torch::Tensor& x) {
    EncoderFeatures f;
    torch::Tensor h = stem_->forward(x);
    for (auto& d : down_) {
        f.skips.push_back(h);
        h = d->forward(h);
    }
    f.bottleneck = h;
    return f;
}

DecoderImpl::DecoderImpl(const GeneratorSpec& spec) {
    up_.resize(spec.depth);
    merge_.resize(spec.depth);
    for (int i = spec.depth - 1; i >= 0; --i) {
        up_[i] = register_module("up" + std::to_string(i), up_in_relu(spec.channels_at(i + 1), spec.channels_at(i)));
        merge_[i] = register_module("merge" + std::to_string(i),
                                    conv_in_relu(2 * spec.channels_at(i), spec.channels_at(i), 3, 1, 1));
    }
    head_ = register_module("head", nn::Conv2d(nn::Conv2dOptions(spec.channels_at(0), 1, 3).padding(1)));
}

torch::Tensor DecoderImpl::forward(const torch::Tensor& bottleneck, const std::vector<torch::Tensor>& skips) {
    torch::Tensor h = bottleneck;
    for (int i = static_cast<int>(up_.size()) - 1; i >= 0; --i) {
        h = up_[i]->forward(h);
        h = merge_[i]->forward(torch::cat({h, skips[i]}, 1));
    }
    return torch::tanh(head_->forward(h));
}

ConcatMixFusion::ConcatMixFusion(int channels, int inputs) : channels_(channels), inputs_(inputs) {
    if (inputs < 1) throw InvalidInput("fusion: needs at least one input");
    mix_in_ = register_module("mix_in", nn::Conv2d(nn::Conv2dOptions(inputs * channels, channels, 1)));
    mix_out_ = register_module("mix_out", nn::Conv2d(nn::Conv2dOptions(channels, channels, 1)));
}

torch::Tensor ConcatMixFusion::forward(const std::vector<torch::Tensor>& features) {
    if (static_cast<int>(features.size()) != inputs_) {
        throw InvalidInput("fusion: expected " + std::to_string(inputs_) + " inputs, got " + std::to_string(features.size()));
    }
    for (const auto& f : features) {
        if (f.dim() != 4 || f.size(1) != channels_ || !f.sizes().equals(features.front().sizes())) {
            throw ShapeMismatch("fusion: inputs must share an N×" + std::to_string(channels_) + "×h×w shape");
        }
    }
    return mix_out_->forward(torch::relu(mix_in_->forward(torch::cat(features, 1))));
}

std::shared_ptr<FusionBlock> make_fusion(std::string_view kind, int channels, int inputs) {
    if (kind == "concat-mix-v1") return std::make_shared<ConcatMixFusion>(channels, inputs);
    throw InvalidInput("unknown fusion block '" + std::string(kind) + "'");
}

GeneratorImpl::GeneratorImpl(const GeneratorSpec& spec, const BranchLayout& layout, std::string_view fusion_kind)
    : spec_(spec), layout_(layout) {
    if (spec.depth < 1 || spec.base_channels < 1) throw InvalidInput("generator: depth and width must be positive");
    if (layout.local_decoder && !layout.fusion) throw InvalidInput("generator: a local decoder needs the fusion block");
    const int in = 1 + static_cast<int>(kCond);
    global_encoder_ = register_module("global_encoder", Encoder(spec, in));
    if (layout.local_encoder) local_encoder_ = register_module("local_encoder", Encoder(spec, in));
    if (layout.fusion) {
        fusion_ = register_module("fusion", make_fusion(fusion_kind, spec.bottleneck_channels(), layout.fusion_inputs()));
    }
    global_decoder_ = register_module("global_decoder", Decoder(spec));
    if (layout.local_decoder) local_decoder_ = register_module("local_decoder", Decoder(spec));
}

TranslationOutput GeneratorImpl::forward(const torch::Tensor& global_in, const torch::Tensor& local_in,
                                         const torch::Tensor& target) {
    require_image_batch(global_in, "generator global input");
    const std::int64_t stride = std::int64_t{1} << spec_.depth;
    if (global_in.size(2) % stride != 0 || global_in.size(3) % stride != 0) {
        throw ShapeMismatch("generator: input side must be a multiple of " + std::to_string(stride));
    }
    EncoderFeatures g = global_encoder_->forward(condition(global_in, target));
    EncoderFeatures l;
    if (layout_.local_encoder) {
        require_image_batch(local_in, "generator local input");
        if (!local_in.sizes().equals(global_in.sizes())) throw ShapeMismatch("generator: branch inputs differ in shape");
        l = local_encoder_->forward(condition(local_in, target));
    }

    TranslationOutput out;
    if (layout_.fusion) {
        out.fused_feature = layout_.local_encoder ? fusion_->forward({g.bottleneck, l.bottleneck})
                                                  : fusion_->forward({g.bottleneck});
    } else {
        out.fused_feature = g.bottleneck;
    }
    out.whole = global_decoder_->forward(out.fused_feature, g.skips);
    if (layout_.local_decoder) {
        out.tumor = local_decoder_->forward(out.fused_feature, layout_.local_encoder ? l.skips : g.skips);
    }
    out.feature_tap = layout_.tap == FeatureTap::Fused ? out.fused_feature : g.bottleneck;
    return out;
}

TranslationOutput teacher_forward(Generator& g, const torch::Tensor& image, const torch::Tensor& tumor_image,
                                  const torch::Tensor& target) {
    if (!g->layout().local_encoder) throw InvalidInput("teacher_forward: generator has no local encoder");
    return g->forward(image, tumor_image, target);
}

TranslationOutput student_forward(Generator& g, const torch::Tensor& image, const torch::Tensor& target) {
    return g->forward(image, g->layout().local_encoder ? image : torch::Tensor(), target);
}

CriticImpl::CriticImpl(const CriticSpec& spec) : spec_(spec) {
    if (spec.layers < 1 || spec.channels < 1) throw InvalidInput("critic: layers and width must be positive");
    nn::Sequential trunk;
    int in = 1;
    for (int i = 0; i < spec.layers; ++i) {
        trunk->push_back(nn::Conv2d(nn::Conv2dOptions(in, spec.channels_at(i), 4).stride(2).padding(1)));
        trunk->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.01)));
        in = spec.channels_at(i);
    }
    trunk_ = register_module("trunk", trunk);
    src_head_ = register_module("src_head", nn::Conv2d(nn::Conv2dOptions(in, 1, 3).padding(1)));
    if (spec.map_size() < 1) throw InvalidInput("critic: too many layers for the input resolution");
    cls_head_ = register_module("cls_head", nn::Conv2d(nn::Conv2dOptions(in, kCond, spec.map_size()).bias(false)));
}

CriticOutput CriticImpl::forward(const torch::Tensor& x) {
    require_image_batch(x, "critic input");
    torch::Tensor h = trunk_->forward(x);
    return CriticOutput{src_head_->forward(h), cls_head_->forward(h).flatten(1)};
}

NetworkSet NetworkSet::create(const core::ExperimentConfig& cfg, Role role, std::uint64_t init_seed) {
    NetworkSet s;
    s.role = role;
    s.scheme = cfg.student_scheme;
    s.generator_spec = GeneratorSpec::from_config(cfg);
    s.critic_spec = CriticSpec::from_config(cfg);
    torch::manual_seed(init_seed);
    s.generator = Generator(s.generator_spec, s.layout());
    s.global_critic = Critic(s.critic_spec);
    if (s.layout().local_decoder) s.local_critic = Critic(s.critic_spec);
    return s;
}

NamedTensors NetworkSet::named_tensors() const {
    NamedTensors out;
    auto add = [&](const std::string& prefix, const torch::nn::Module& m) {
        for (const auto& p : m.named_parameters()) out.emplace_back(prefix + p.key(), p.value());
        for (const auto& b : m.named_buffers()) out.emplace_back(prefix + b.key(), b.value());
    };
    add("generator.", *generator);
    add("critic_g.", *global_critic);
    if (local_critic) add("critic_l.", *local_critic);
    return out;
}

void NetworkSet::train(bool on) {
    generator->train(on);
    global_critic->train(on);
    if (local_critic) local_critic->train(on);
}

std::int64_t parameter_count(const torch::nn::Module& m) {
    std::int64_t n = 0;
    for (const auto& p : m.parameters()) n += p.numel();
    return n;
}

}  // namespace utad::model
