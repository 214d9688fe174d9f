#include "utad/data/manifest.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "utad/core/rng.hpp"
#include "utad/error.hpp"

namespace utad::data {

namespace fs = std::filesystem;

std::string_view to_string(Split s) noexcept {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "?";
}

std::optional<Split> parse_split(std::string_view s) {
    if (s == "train") return Split::Train;
    if (s == "val") return Split::Val;
    if (s == "test") return Split::Test;
    return std::nullopt;
}

fs::path volume_path(const fs::path& root, const std::string& subject, core::Modality m) {
    return root / subject / (subject + "_" + std::string(core::to_string(m)) + ".nii.gz");
}

fs::path label_path(const fs::path& root, const std::string& subject) {
    return root / subject / (subject + "_seg.nii.gz");
}

std::vector<const SubjectRecord*> DatasetManifest::split(Split s) const {
    std::vector<const SubjectRecord*> out;
    for (const auto& r : subjects) {
        if (r.split == s) out.push_back(&r);
    }
    return out;
}

DatasetManifest DatasetManifest::scan(const fs::path& root, SplitSizes sizes, std::uint64_t seed) {
    if (!fs::is_directory(root)) throw IngestionError(root.string() + ": not a directory");
    if (sizes.train < 0 || sizes.val < 0 || sizes.test < 0) throw InvalidInput("split sizes must be non-negative");

    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory()) ids.push_back(entry.path().filename().string());
    }
    std::sort(ids.begin(), ids.end());
    if (static_cast<int>(ids.size()) < sizes.total()) {
        throw IngestionError(root.string() + ": " + std::to_string(ids.size()) + " subjects found, " +
                             std::to_string(sizes.total()) + " requested by the split sizes");
    }

    core::Rng rng(seed);
    for (std::size_t i = ids.size(); i > 1; --i) {
        std::swap(ids[i - 1], ids[rng.below(i)]);
    }

    DatasetManifest m;
    m.seed = seed;
    m.sizes = sizes;
    const fs::path abs_root = fs::absolute(root);
    for (int i = 0; i < sizes.total(); ++i) {
        SubjectRecord r;
        r.subject_id = ids[static_cast<std::size_t>(i)];
        r.split = i < sizes.train ? Split::Train : (i < sizes.train + sizes.val ? Split::Val : Split::Test);
        for (core::Modality mod : core::kAllModalities) {
            r.volumes[core::index_of(mod)] = volume_path(abs_root, r.subject_id, mod);
            if (!fs::exists(r.volumes[core::index_of(mod)])) {
                throw IngestionError(r.volumes[core::index_of(mod)].string() + ": missing modality volume");
            }
        }
        r.labels = label_path(abs_root, r.subject_id);
        if (!fs::exists(r.labels)) throw IngestionError(r.labels.string() + ": missing label volume");
        m.subjects.push_back(std::move(r));
    }
    // Stable, readable order on disk: by split, then subject id.
    std::stable_sort(m.subjects.begin(), m.subjects.end(), [](const SubjectRecord& a, const SubjectRecord& b) {
        if (a.split != b.split) return a.split < b.split;
        return a.subject_id < b.subject_id;
    });
    return m;
}

void DatasetManifest::save(const fs::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write manifest " + path.string());
    out << "# utad-manifest v1\n";
    out << "# seed=" << seed << '\n';
    out << "# split_sizes train=" << sizes.train << " val=" << sizes.val << " test=" << sizes.test << '\n';
    out << "# split_level=subject\n";
    out << "# modality_ordering=" << core::kModalityOrdering << '\n';
    for (const auto& r : subjects) {
        out << r.subject_id << '\t' << to_string(r.split);
        for (const auto& v : r.volumes) out << '\t' << v.string();
        out << '\t' << r.labels.string() << '\n';
    }
}

DatasetManifest DatasetManifest::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IngestionError(path.string() + ": cannot read manifest");
    const fs::path base = fs::absolute(path).parent_path();
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };

    DatasetManifest m;
    std::string line;
    int line_no = 0;
    bool saw_magic = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (line.rfind("# utad-manifest", 0) == 0) saw_magic = true;
            if (line.rfind("# seed=", 0) == 0) m.seed = std::stoull(line.substr(7));
            if (line.rfind("# split_sizes", 0) == 0) {
                std::sscanf(line.c_str(), "# split_sizes train=%d val=%d test=%d", &m.sizes.train, &m.sizes.val,
                            &m.sizes.test);
            }
            if (line.rfind("# modality_ordering=", 0) == 0 && line.substr(20) != core::kModalityOrdering) {
                throw IngestionError(path.string() + ": manifest uses a different modality ordering");
            }
            continue;
        }
        std::vector<std::string> cols;
        std::istringstream fields(line);
        for (std::string tok; std::getline(fields, tok, '\t');) cols.push_back(tok);
        const std::string where = path.string() + ":" + std::to_string(line_no);
        if (cols.size() != 2 + core::kNumModalities + 1) {
            throw IngestionError(where + ": expected " + std::to_string(3 + core::kNumModalities) + " tab-separated fields");
        }
        auto parsed = parse_split(cols[1]);
        if (!parsed) throw IngestionError(where + ": bad split '" + cols[1] + "'");
        SubjectRecord r;
        r.subject_id = cols[0];
        r.split = *parsed;
        for (std::size_t i = 0; i < core::kNumModalities; ++i) r.volumes[i] = resolve(cols[2 + i]);
        r.labels = resolve(cols.back());
        m.subjects.push_back(std::move(r));
    }
    if (!saw_magic) throw IngestionError(path.string() + ": not a utad manifest");
    return m;
}

}  // namespace utad::data
