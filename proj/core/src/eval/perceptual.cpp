#include "utad/eval/perceptual.hpp"

#include <torch/script.h>

#include "utad/core/rng.hpp"
#include "utad/error.hpp"
#include "utad/model/tensors.hpp"

namespace utad::eval {

namespace {

constexpr int kWidths[] = {1, 8, 16, 32};

}  // namespace

SurrogateExtractor::SurrogateExtractor(std::uint64_t seed) {
    core::Rng rng(seed);
    for (std::size_t l = 0; l + 1 < std::size(kWidths); ++l) {
        const int in = kWidths[l], out = kWidths[l + 1];
        auto w = torch::empty({out, in, 3, 3}, torch::kFloat32);
        const double scale = std::sqrt(2.0 / (in * 9));
        auto* p = w.data_ptr<float>();
        for (std::int64_t i = 0; i < w.numel(); ++i) p[i] = static_cast<float>(scale * rng.normal());
        weights_.push_back(w);
    }
}

std::vector<torch::Tensor> SurrogateExtractor::features(const torch::Tensor& x) {
    torch::NoGradGuard no_grad;
    std::vector<torch::Tensor> out;
    torch::Tensor h = x.to(torch::kFloat32);
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        h = torch::relu(torch::conv2d(h, weights_[l], {}, l == 0 ? 1 : 2, 1));
        out.push_back(h);
    }
    return out;
}

struct ScriptedExtractor::Module {
    torch::jit::script::Module m;
};

ScriptedExtractor::ScriptedExtractor(const std::filesystem::path& path) : module_(std::make_unique<Module>()) {
    try {
        module_->m = torch::jit::load(path.string());
    } catch (const c10::Error& e) {
        throw Error(path.string() + ": cannot load perceptual extractor: " + e.what_without_backtrace());
    }
    module_->m.eval();
    label_ = "torchscript:" + path.filename().string();
}

ScriptedExtractor::~ScriptedExtractor() = default;

std::vector<torch::Tensor> ScriptedExtractor::features(const torch::Tensor& x) {
    torch::NoGradGuard no_grad;
    const auto result = module_->m.forward({x});
    std::vector<torch::Tensor> out;
    if (result.isTensorList()) {
        for (const auto& t : result.toTensorList()) out.push_back(t);
    } else if (result.isTuple()) {
        for (const auto& v : result.toTupleRef().elements()) out.push_back(v.toTensor());
    } else if (result.isList()) {
        for (const auto& v : result.toListRef()) out.push_back(v.toTensor());
    } else {
        throw Error("perceptual extractor must return a list or tuple of tensors");
    }
    return out;
}

std::shared_ptr<FeatureExtractor> make_extractor(const std::string& spec) {
    if (spec == "none" || spec.empty()) return nullptr;
    if (spec == "surrogate") return std::make_shared<SurrogateExtractor>();
    return std::make_shared<ScriptedExtractor>(spec);
}

torch::Tensor perceptual_distance(const torch::Tensor& a, const torch::Tensor& b, FeatureExtractor& extractor) {
    if (!a.sizes().equals(b.sizes())) throw ShapeMismatch("perceptual distance: inputs differ in shape");
    const auto fa = extractor.features(a), fb = extractor.features(b);
    torch::Tensor total = torch::zeros({a.size(0)}, torch::kFloat64);
    for (std::size_t l = 0; l < fa.size(); ++l) {
        auto na = fa[l].to(torch::kFloat64), nb = fb[l].to(torch::kFloat64);
        na = na / (na.pow(2).sum(1, true).sqrt() + 1e-10);
        nb = nb / (nb.pow(2).sum(1, true).sqrt() + 1e-10);
        total += (na - nb).pow(2).sum(1).mean({1, 2});
    }
    return total;
}

double perceptual_distance(const core::ImageSlice& a, const core::ImageSlice& b, FeatureExtractor* extractor) {
    if (!extractor) throw UndefinedMetric("no perceptual feature extractor registered");
    core::require_same_shape(a.height, a.width, b.height, b.width, "perceptual distance");
    auto to_net = [](const core::ImageSlice& s) {
        auto t = model::stack_images({s});
        return s.space == core::IntensitySpace::Unit ? t * 2 - 1 : t;
    };
    return perceptual_distance(to_net(a), to_net(b), *extractor)[0].item<double>();
}

}  // namespace utad::eval
