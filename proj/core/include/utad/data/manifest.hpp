#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "utad/core/modality.hpp"

namespace utad::data {

enum class Split { Train, Val, Test };

std::string_view to_string(Split s) noexcept;
std::optional<Split> parse_split(std::string_view s);

/// One subject's files. Paths are absolute once loaded.
struct SubjectRecord {
    std::string subject_id;
    Split split = Split::Train;
    std::array<std::filesystem::path, core::kNumModalities> volumes;  // canonical modality order
    std::filesystem::path labels;
};

struct SplitSizes {
    int train = 0;
    int val = 0;
    int test = 0;

    int total() const noexcept { return train + val + test; }
    friend bool operator==(const SplitSizes&, const SplitSizes&) = default;
};

/// Subject-level split of a BRATS-layout dataset.
///
/// Text form, one record per line:
///   # utad-manifest v1
///   # seed=<n>
///   # split_sizes train=<n> val=<n> test=<n>
///   # split_level=subject
///   # modality_ordering=flair,t1,t1ce,t2
///   <subject> <split> <flair> <t1> <t1ce> <t2> <seg>
/// Relative paths resolve against the manifest's directory.
struct DatasetManifest {
    std::uint64_t seed = 0;
    SplitSizes sizes;
    std::vector<SubjectRecord> subjects;

    std::vector<const SubjectRecord*> split(Split s) const;

    /// Scans `<root>/<subject>/<subject>_<modality>.nii.gz` (+ `_seg`), shuffles the
    /// sorted subject list with `seed` and assigns train, then val, then test.
    /// Subjects beyond sizes.total() are left out. Throws IngestionError when a
    /// subject lacks a file or when fewer subjects exist than requested.
    static DatasetManifest scan(const std::filesystem::path& root, SplitSizes sizes, std::uint64_t seed);

    void save(const std::filesystem::path& path) const;
    static DatasetManifest load(const std::filesystem::path& path);
};

/// BRATS file name for a subject and modality ("<subject>_<modality>.nii.gz").
std::filesystem::path volume_path(const std::filesystem::path& root, const std::string& subject, core::Modality m);
std::filesystem::path label_path(const std::filesystem::path& root, const std::string& subject);

}  // namespace utad::data
