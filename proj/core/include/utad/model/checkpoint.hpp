#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "utad/core/config.hpp"
#include "utad/model/networks.hpp"

namespace utad::model {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Everything a checkpoint file holds.
///
/// On disk: the 8-byte magic "UTADCKPT", a little-endian u32 format version, a
/// u64 manifest length, the JSON manifest (config, role, scheme, epoch, fusion
/// kind, modality ordering, metadata, and the name/shape table), then each
/// tensor's float32 values, little-endian, in table order.
struct CheckpointContents {
    core::ExperimentConfig config;
    Role role = Role::Teacher;
    core::StudentScheme scheme = core::StudentScheme::A;
    int epoch = 0;  // completed epochs
    std::string fusion_kind = "concat-mix-v1";
    std::map<std::string, std::string> metadata;
    NamedTensors tensors;
};

void write_checkpoint(const std::filesystem::path& path, const CheckpointContents& contents);
/// Throws CheckpointError on a bad magic, another format version, another
/// modality ordering, or a truncated payload.
CheckpointContents read_checkpoint(const std::filesystem::path& path);

/// Deep copy of the networks' tensors.
CheckpointContents snapshot(const NetworkSet& nets, const core::ExperimentConfig& cfg, int epoch);

/// Copies the matching "generator."/"critic_*." tensors into `nets`. Throws
/// CheckpointError naming the first parameter that is missing or has another shape.
void restore_networks(NetworkSet& nets, const CheckpointContents& contents);

/// Builds the networks described by a checkpoint and restores their parameters.
NetworkSet networks_from(const CheckpointContents& contents);

/// Tensor named `name`, or an undefined tensor.
torch::Tensor find_tensor(const CheckpointContents& contents, const std::string& name);

}  // namespace utad::model
