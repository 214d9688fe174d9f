#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace utad::core {

/// Source of the guidance mask fed to the teacher's local branch.
enum class MaskMode { WT, TC, ET, Zeros, Random };

/// Student architecture variant.
///   A: full global + local branches (same structure as the teacher)
///   B: global branch only
///   C: no local encoder (fusion sees the global bottleneck only)
///   D: no local decoder (single decoder after fusion)
enum class StudentScheme { A, B, C, D };

std::string_view to_string(MaskMode m) noexcept;
std::optional<MaskMode> parse_mask_mode(std::string_view s);
std::string_view to_string(StudentScheme s) noexcept;
std::optional<StudentScheme> parse_scheme(std::string_view s);

/// Every hyperparameter of a run. Serialized as flat `key = value` text.
struct ExperimentConfig {
    // Loss weights.
    double lambda_gp = 10.0;
    double lambda_1 = 10.0;
    double lambda_2 = 10.0;

    // Schedule and optimizer.
    int epochs = 100;
    double lr_initial = 1e-4;
    double lr_final = 1e-6;
    int lr_constant_epochs = 50;
    double moment_1 = 0.9;
    double moment_2 = 0.999;
    int batch_size = 16;
    int critic_steps_per_gen_step = 1;
    int max_steps_per_epoch = 0;  // 0: one full pass over the training slices
    int checkpoint_every = 10;

    // Data.
    MaskMode mask_mode = MaskMode::WT;
    std::uint64_t seed = 0;
    int resolution = 128;
    double slice_threshold = 0.01;
    double clip_low_percentile = 0.5;
    double clip_high_percentile = 99.5;
    bool augment = true;
    int workers = 1;

    // Architecture.
    StudentScheme student_scheme = StudentScheme::A;
    int depth = 4;
    int base_channels = 64;
    int critic_channels = 64;
    int critic_layers = 3;

    /// Throws InvalidInput naming the first violated invariant.
    void validate() const;

    std::string serialize() const;
    /// Rejects unknown keys, malformed values and invariant violations.
    static ExperimentConfig parse(std::string_view text);

    static ExperimentConfig load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    /// Sets one field from its textual form. Throws InvalidInput on unknown key or bad value.
    void set(std::string_view key, std::string_view value);
    /// Textual value of one field.
    std::string get(std::string_view key) const;
    static const std::vector<std::string>& keys();

    /// 16 hex digits of FNV-1a over serialize(); stamped into every numeric output.
    std::string hash() const;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

}  // namespace utad::core
