#include "utad/core/modality.hpp"

#include <algorithm>
#include <cctype>

#include "utad/error.hpp"

namespace utad::core {

Modality modality_from_index(std::size_t index) {
    if (index >= kNumModalities) {
        throw InvalidInput("modality index out of range: " + std::to_string(index));
    }
    return kAllModalities[index];
}

std::string_view to_string(Modality m) noexcept {
    switch (m) {
        case Modality::Flair: return "flair";
        case Modality::T1: return "t1";
        case Modality::T1ce: return "t1ce";
        case Modality::T2: return "t2";
    }
    return "?";
}

std::string_view display_name(Modality m) noexcept {
    switch (m) {
        case Modality::Flair: return "Flair";
        case Modality::T1: return "T1";
        case Modality::T1ce: return "T1ce";
        case Modality::T2: return "T2";
    }
    return "?";
}

std::optional<Modality> parse_modality(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    for (Modality m : kAllModalities) {
        if (lower == to_string(m)) return m;
    }
    return std::nullopt;
}

std::array<float, kNumModalities> one_hot(Modality m) noexcept {
    std::array<float, kNumModalities> v{};
    v[index_of(m)] = 1.0f;
    return v;
}

}  // namespace utad::core
