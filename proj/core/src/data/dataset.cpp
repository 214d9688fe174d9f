#include "utad/data/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "utad/data/preprocess.hpp"
#include "utad/error.hpp"

namespace utad::data {

LoadOptions LoadOptions::from_config(const core::ExperimentConfig& cfg) {
    return LoadOptions{cfg.resolution, cfg.slice_threshold, cfg.clip_low_percentile, cfg.clip_high_percentile,
                       cfg.workers};
}

std::size_t SliceDataset::num_slices() const noexcept {
    std::size_t n = 0;
    for (const auto& s : subjects) n += s.num_slices();
    return n;
}

SubjectSlices load_subject(const SubjectRecord& record, const LoadOptions& options) {
    std::array<Volume, core::kNumModalities> volumes;
    for (core::Modality m : core::kAllModalities) {
        volumes[core::index_of(m)] = load_volume(record.volumes[core::index_of(m)]);
    }
    const Volume labels = load_volume(record.labels);

    SubjectSlices out;
    out.subject_id = record.subject_id;
    out.spacing = labels.spacing;
    for (const Volume& v : volumes) {
        if (v.depth != labels.depth || v.height != labels.height || v.width != labels.width) {
            throw ShapeMismatch(record.subject_id + ": modality volume and label volume shapes differ");
        }
    }

    std::array<IntensityWindow, core::kNumModalities> windows;
    for (std::size_t m = 0; m < core::kNumModalities; ++m) {
        windows[m] = fit_intensity_window(volumes[m], options.low_percentile, options.high_percentile);
    }

    for (int z = 0; z < labels.depth; ++z) {
        bool keep = true;
        for (const Volume& v : volumes) {
            const double f = nonzero_fraction(v.slice(z));
            keep = keep && f > 0.0 && f >= options.slice_threshold;
        }
        if (!keep) continue;
        out.slice_indices.push_back(z);
        for (std::size_t m = 0; m < core::kNumModalities; ++m) {
            out.images[m].push_back(preprocess(volumes[m].slice(z), windows[m], options.resolution));
        }
        out.labels.push_back(resize_nearest(labels.label_slice(z), options.resolution, options.resolution));
    }
    return out;
}

SliceDataset SliceDataset::load(const DatasetManifest& manifest, Split split, const LoadOptions& options) {
    const auto records = manifest.split(split);
    SliceDataset ds;
    ds.resolution = options.resolution;
    ds.subjects.resize(records.size());

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < records.size(); i = next++) {
            try {
                ds.subjects[i] = load_subject(*records[i], options);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const int n_workers = std::max(1, std::min<int>(options.workers, static_cast<int>(records.size())));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
    return ds;
}

core::TumorRegion region_of(core::MaskMode mode) noexcept {
    switch (mode) {
        case core::MaskMode::TC: return core::TumorRegion::TC;
        case core::MaskMode::ET: return core::TumorRegion::ET;
        default: return core::TumorRegion::WT;
    }
}

core::TumorMask guidance_mask(const core::LabelSlice& labels, core::MaskMode mode, core::Rng& rng) {
    switch (mode) {
        case core::MaskMode::WT:
        case core::MaskMode::TC:
        case core::MaskMode::ET: return core::compose_region(labels, region_of(mode));
        case core::MaskMode::Zeros: return core::TumorMask::zeros(labels.height, labels.width);
        case core::MaskMode::Random: {
            auto m = core::TumorMask::zeros(labels.height, labels.width);
            for (auto& p : m.pixels) p = rng.bernoulli(0.5) ? 1 : 0;
            return m;
        }
    }
    return core::TumorMask::zeros(labels.height, labels.width);
}

UnpairedSampler::UnpairedSampler(const SliceDataset& dataset, core::MaskMode mask_mode, std::uint64_t seed, bool augment)
    : dataset_(&dataset), mask_mode_(mask_mode), augment_(augment), rng_(seed) {
    if (dataset.num_slices() == 0) throw InvalidInput("unpaired sampler: the split holds no slices");
}

void UnpairedSampler::begin_epoch() {
    const auto& subjects = dataset_->subjects;
    assignment_.resize(subjects.size());
    for (auto& a : assignment_) a = core::modality_from_index(rng_.below(core::kNumModalities));
    order_.clear();
    for (std::size_t s = 0; s < subjects.size(); ++s) {
        for (std::size_t k = 0; k < subjects[s].num_slices(); ++k) order_.push_back(Unit{s, k});
    }
    for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[rng_.below(i)]);
    cursor_ = 0;
}

SamplerItem UnpairedSampler::next() {
    if (cursor_ >= order_.size()) throw InvalidInput("unpaired sampler: epoch exhausted (call begin_epoch)");
    const Unit u = order_[cursor_++];
    const SubjectSlices& subj = dataset_->subjects[u.subject];
    const core::Modality source = assignment_[u.subject];

    SamplerItem item;
    std::size_t t = rng_.below(core::kNumModalities - 1);
    if (t >= core::index_of(source)) ++t;
    item.target = core::modality_from_index(t);

    Sample& s = item.sample;
    s.subject_id = subj.subject_id;
    s.slice_index = subj.slice_indices[u.slice];
    s.modality = source;
    s.image = subj.images[core::index_of(source)][u.slice];
    const bool from_labels = mask_mode_ != core::MaskMode::Zeros && mask_mode_ != core::MaskMode::Random;
    const auto& labels = subj.labels[u.slice];
    s.mask = from_labels ? core::compose_region(labels, region_of(mask_mode_))
                         : core::TumorMask::zeros(labels.height, labels.width);
    if (augment_) s = augment(s, rng_);
    if (!from_labels) s.mask = guidance_mask(labels, mask_mode_, rng_);
    return item;
}

std::vector<SamplerItem> UnpairedSampler::next_batch(std::size_t n) {
    std::vector<SamplerItem> out;
    n = std::min(n, remaining());
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(next());
    return out;
}

}  // namespace utad::data
