#pragma once

#include <vector>

#include <torch/torch.h>

#include "utad/core/image.hpp"
#include "utad/core/modality.hpp"
#include "utad/core/region.hpp"

namespace utad::model {

/// N×1×H×W float tensor from same-shaped slices. Values are copied as stored;
/// the caller is responsible for the intensity space.
torch::Tensor stack_images(const std::vector<core::ImageSlice>& images);
torch::Tensor stack_masks(const std::vector<core::TumorMask>& masks);

/// Slice `index` of an N×1×H×W tensor (or an H×W tensor when index is 0).
core::ImageSlice to_image(const torch::Tensor& t, core::IntensitySpace space, std::int64_t index = 0);

/// Long tensor of canonical modality indices.
torch::Tensor modality_indices(const std::vector<core::Modality>& modalities);
torch::Tensor modality_indices(core::Modality m, std::int64_t n);

/// Float N×4 one-hot rows for a long index tensor.
torch::Tensor one_hot_condition(const torch::Tensor& indices);

/// Tumor image of a network-space batch: the mask is applied in [0,1] space and
/// the product mapped back, so masked-out pixels become -1 (black).
inline torch::Tensor mask_network(const torch::Tensor& x, const torch::Tensor& mask) { return (x + 1) * mask - 1; }

}  // namespace utad::model
