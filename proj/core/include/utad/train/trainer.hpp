#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "utad/core/config.hpp"
#include "utad/core/rng.hpp"
#include "utad/data/dataset.hpp"
#include "utad/data/manifest.hpp"
#include "utad/losses/losses.hpp"
#include "utad/model/checkpoint.hpp"
#include "utad/model/networks.hpp"

namespace utad::train {

/// Learning rate of epoch `e` (0-based): lr_initial before lr_constant_epochs,
/// then linear down to exactly lr_final at the last epoch. Throws InvalidInput
/// when e is outside [0, epochs).
double lr_at_epoch(int e, const core::ExperimentConfig& cfg);

/// One training batch in network space.
struct Batch {
    torch::Tensor image;   // I_src, N×1×H×W in [-1, 1]
    torch::Tensor mask;    // M, N×1×H×W in {0, 1}
    torch::Tensor source;  // long N, canonical index of the source modality
    torch::Tensor target;  // long N, target modality

    static Batch from_items(const std::vector<data::SamplerItem>& items);
    std::int64_t size() const { return image.size(0); }
};

/// Adam optimizers for a network set, moments taken from the config.
struct Optimizers {
    std::unique_ptr<torch::optim::Adam> generator;
    std::unique_ptr<torch::optim::Adam> global_critic;
    std::unique_ptr<torch::optim::Adam> local_critic;  // null when there is no local critic

    static Optimizers create(model::NetworkSet& nets, const core::ExperimentConfig& cfg);
    void set_lr(double lr);

    /// Moment buffers as "optim.<which>.<parameter>.exp_avg|exp_avg_sq" tensors plus
    /// per-parameter step counts in `metadata`.
    void save_state(const model::NetworkSet& nets, model::NamedTensors& tensors,
                    std::map<std::string, std::string>& metadata) const;
    void load_state(const model::NetworkSet& nets, const model::CheckpointContents& contents);
};

/// Critic update on both critics, then (when `update_generator`) one generator
/// update on the same batch. Throws NonFiniteLoss naming the first bad term.
losses::LossBreakdown teacher_step(const Batch& batch, model::NetworkSet& nets, Optimizers& opt,
                                   const core::ExperimentConfig& cfg, core::Rng& rng, bool update_generator = true);

/// As teacher_step for mask-free student networks, plus distillation from the
/// frozen `teacher`, which runs the mask-guided forward on the same batch.
losses::LossBreakdown student_step(const Batch& batch, model::NetworkSet& student, model::NetworkSet& teacher,
                                   Optimizers& opt, const core::ExperimentConfig& cfg, core::Rng& rng,
                                   bool update_generator = true);

/// Disables gradients of every teacher parameter.
void freeze(model::NetworkSet& nets);

/// Everything beyond network weights needed to continue a run.
struct TrainState {
    int epoch = 0;   // completed epochs
    long step = 0;   // completed critic steps
    model::Role role = model::Role::Teacher;
    std::string trainer_rng;
    std::string sampler_rng;
    losses::LossBreakdown running;  // mean of the rows logged in the last epoch
    long running_count = 0;
};

struct EpochSummary {
    int epoch = 0;
    double lr = 0;
    long steps = 0;
    losses::LossBreakdown mean;
    std::optional<double> val_ssim;
    double seconds = 0;
};

struct RunOptions {
    std::filesystem::path out_dir;
    model::Role role = model::Role::Teacher;
    std::optional<std::filesystem::path> teacher_checkpoint;  // required for students
    std::optional<std::filesystem::path> resume_from;
    int stop_after_epoch = -1;        // stop once this many epochs are complete (-1: run to the end)
    bool write_samples = true;        // PNG grids at checkpoint epochs
    int validation_slices = 32;       // 0 disables validation scoring
    std::function<void(const EpochSummary&)> on_epoch;
};

struct RunResult {
    std::filesystem::path final_checkpoint;
    std::vector<EpochSummary> epochs;
    TrainState state;
};

/// Trains one role on the manifest's train split.
///
/// Writes into out_dir: config.resolved, losses.csv (a `# config_hash=` line,
/// the header, then one row per generator update), checkpoint_eNNN.utad every
/// checkpoint_every epochs and at the end, final.utad, samples_eNNN.png, and
/// validation.csv when the manifest has a validation split.
RunResult run_training(const data::DatasetManifest& manifest, const core::ExperimentConfig& cfg, const RunOptions& options);

/// Checkpoint file name for a completed-epoch count.
std::string checkpoint_name(int epoch);

}  // namespace utad::train
