#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace utad::core {

/// MRI sequence. The numeric values are the canonical ordering persisted in
/// checkpoints; conditioning vectors depend on it.
enum class Modality : int { Flair = 0, T1 = 1, T1ce = 2, T2 = 3 };

inline constexpr std::size_t kNumModalities = 4;

inline constexpr std::array<Modality, kNumModalities> kAllModalities = {
    Modality::Flair, Modality::T1, Modality::T1ce, Modality::T2};

/// Ordering stamp written into checkpoints and manifests.
inline constexpr std::string_view kModalityOrdering = "flair,t1,t1ce,t2";

constexpr std::size_t index_of(Modality m) noexcept { return static_cast<std::size_t>(m); }

/// Throws InvalidInput for indices outside [0, 4).
Modality modality_from_index(std::size_t index);

/// Lower-case BRATS file suffix: "flair", "t1", "t1ce", "t2".
std::string_view to_string(Modality m) noexcept;

/// Display name as used in reports: "Flair", "T1", "T1ce", "T2".
std::string_view display_name(Modality m) noexcept;

/// Case-insensitive parse of either spelling.
std::optional<Modality> parse_modality(std::string_view name);

std::array<float, kNumModalities> one_hot(Modality m) noexcept;

}  // namespace utad::core
