#include "utad/model/tensors.hpp"

#include "utad/error.hpp"

namespace utad::model {

torch::Tensor stack_images(const std::vector<core::ImageSlice>& images) {
    if (images.empty()) throw InvalidInput("stack_images: empty batch");
    const int h = images.front().height, w = images.front().width;
    auto out = torch::empty({static_cast<std::int64_t>(images.size()), 1, h, w}, torch::kFloat32);
    float* dst = out.data_ptr<float>();
    for (const auto& im : images) {
        core::require_same_shape(h, w, im.height, im.width, "stack_images");
        dst = std::copy(im.pixels.begin(), im.pixels.end(), dst);
    }
    return out;
}

torch::Tensor stack_masks(const std::vector<core::TumorMask>& masks) {
    if (masks.empty()) throw InvalidInput("stack_masks: empty batch");
    const int h = masks.front().height, w = masks.front().width;
    auto out = torch::empty({static_cast<std::int64_t>(masks.size()), 1, h, w}, torch::kFloat32);
    float* dst = out.data_ptr<float>();
    for (const auto& m : masks) {
        core::require_same_shape(h, w, m.height, m.width, "stack_masks");
        for (auto p : m.pixels) *dst++ = static_cast<float>(p);
    }
    return out;
}

core::ImageSlice to_image(const torch::Tensor& t, core::IntensitySpace space, std::int64_t index) {
    torch::Tensor s;
    if (t.dim() == 4) {
        s = t[index][0];
    } else if (t.dim() == 2 && index == 0) {
        s = t;
    } else {
        throw ShapeMismatch("to_image: expected an N×1×H×W or H×W tensor");
    }
    s = s.detach().to(torch::kFloat32).contiguous();
    const int h = static_cast<int>(s.size(0)), w = static_cast<int>(s.size(1));
    const float* p = s.data_ptr<float>();
    core::ImageSlice out(h, w, space);
    std::copy(p, p + out.size(), out.pixels.begin());
    return out;
}

torch::Tensor modality_indices(const std::vector<core::Modality>& modalities) {
    auto out = torch::empty({static_cast<std::int64_t>(modalities.size())}, torch::kLong);
    auto* p = out.data_ptr<std::int64_t>();
    for (auto m : modalities) *p++ = static_cast<std::int64_t>(core::index_of(m));
    return out;
}

torch::Tensor modality_indices(core::Modality m, std::int64_t n) {
    return torch::full({n}, static_cast<std::int64_t>(core::index_of(m)), torch::kLong);
}

torch::Tensor one_hot_condition(const torch::Tensor& indices) {
    return torch::one_hot(indices, core::kNumModalities).to(torch::kFloat32);
}

}  // namespace utad::model
