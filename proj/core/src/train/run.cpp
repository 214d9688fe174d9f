#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "utad/error.hpp"
#include "utad/eval/metrics.hpp"
#include "utad/io/png.hpp"
#include "utad/model/tensors.hpp"
#include "utad/train/trainer.hpp"

namespace utad::train {

namespace fs = std::filesystem;

std::string checkpoint_name(int epoch) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "checkpoint_e%03d.utad", epoch);
    return buf;
}

namespace {

struct SliceRef {
    std::size_t subject, slice;
    core::Modality source, target;
};

// Fixed, spread-out selection of slices with rotating modality pairs.
std::vector<SliceRef> pick_slices(const data::SliceDataset& ds, int limit) {
    std::vector<SliceRef> all;
    for (std::size_t s = 0; s < ds.subjects.size(); ++s) {
        for (std::size_t k = 0; k < ds.subjects[s].num_slices(); ++k) all.push_back({s, k, core::Modality::Flair, core::Modality::T1});
    }
    std::vector<SliceRef> out;
    if (all.empty() || limit <= 0) return out;
    const std::size_t n = std::min(all.size(), static_cast<std::size_t>(limit));
    for (std::size_t i = 0; i < n; ++i) {
        SliceRef r = all[i * all.size() / n];
        r.source = core::modality_from_index(i % core::kNumModalities);
        r.target = core::modality_from_index((i + 1 + (i / core::kNumModalities) % 3) % core::kNumModalities);
        out.push_back(r);
    }
    return out;
}

struct Translated {
    torch::Tensor source, whole, tumor, truth, mask;
};

Translated translate_refs(model::NetworkSet& nets, const data::SliceDataset& ds, const std::vector<SliceRef>& refs,
                          core::MaskMode mode, std::uint64_t seed) {
    torch::NoGradGuard no_grad;
    core::Rng rng = core::Rng::derive(seed, 0x5a3e);
    std::vector<core::ImageSlice> src, truth;
    std::vector<core::TumorMask> masks;
    std::vector<core::Modality> targets;
    for (const auto& r : refs) {
        const auto& subj = ds.subjects[r.subject];
        src.push_back(subj.images[core::index_of(r.source)][r.slice]);
        truth.push_back(subj.images[core::index_of(r.target)][r.slice]);
        masks.push_back(data::guidance_mask(subj.labels[r.slice], mode, rng));
        targets.push_back(r.target);
    }
    Translated t;
    t.source = model::stack_images(src) * 2 - 1;
    t.truth = model::stack_images(truth) * 2 - 1;
    t.mask = model::stack_masks(masks);
    const auto cond = model::one_hot_condition(model::modality_indices(targets));
    const auto out = nets.role == model::Role::Teacher
                         ? model::teacher_forward(nets.generator, t.source, model::mask_network(t.source, t.mask), cond)
                         : model::student_forward(nets.generator, t.source, cond);
    t.whole = out.whole;
    t.tumor = out.tumor;
    return t;
}

double validation_ssim(model::NetworkSet& nets, const data::SliceDataset& ds, const std::vector<SliceRef>& refs,
                       core::MaskMode mode, std::uint64_t seed) {
    const Translated t = translate_refs(nets, ds, refs, mode, seed);
    double sum = 0;
    for (std::int64_t i = 0; i < t.whole.size(0); ++i) {
        const auto gen = model::to_image((t.whole + 1) / 2, core::IntensitySpace::Unit, i);
        const auto truth = model::to_image((t.truth + 1) / 2, core::IntensitySpace::Unit, i);
        sum += eval::ssim(gen, truth);
    }
    return sum / static_cast<double>(t.whole.size(0));
}

void write_samples(const fs::path& path, model::NetworkSet& nets, const data::SliceDataset& ds,
                   const std::vector<SliceRef>& refs, core::MaskMode mode, std::uint64_t seed) {
    if (refs.empty()) return;
    const Translated t = translate_refs(nets, ds, refs, mode, seed);
    const int h = static_cast<int>(t.source.size(2)), w = static_cast<int>(t.source.size(3)), gap = 2;
    io::RgbImage grid(4 * (w + gap) - gap, static_cast<int>(refs.size()) * (h + gap) - gap, 32);
    for (std::size_t i = 0; i < refs.size(); ++i) {
        const auto j = static_cast<std::int64_t>(i);
        const int y = static_cast<int>(i) * (h + gap);
        grid.paste_gray(model::to_image(t.source, core::IntensitySpace::Network, j), y, 0, -1, 1);
        grid.paste_gray(model::to_image(t.whole, core::IntensitySpace::Network, j), y, w + gap, -1, 1);
        if (t.tumor.defined()) grid.paste_gray(model::to_image(t.tumor, core::IntensitySpace::Network, j), y, 2 * (w + gap), -1, 1);
        grid.paste_gray(model::to_image(t.truth, core::IntensitySpace::Network, j), y, 3 * (w + gap), -1, 1);
    }
    io::write_png(path, grid);
}

// Keeps the comment/header lines and the rows of epochs before `epoch`.
void truncate_log(const fs::path& path, int epoch) {
    std::ifstream in(path);
    std::vector<std::string> keep;
    for (std::string line; std::getline(in, line);) {
        if (line.empty()) continue;
        if (line[0] == '#' || line.rfind("epoch,", 0) == 0) {
            keep.push_back(line);
            continue;
        }
        if (std::stoi(line.substr(0, line.find(','))) < epoch) keep.push_back(line);
    }
    in.close();
    std::ofstream out(path, std::ios::trunc);
    for (const auto& l : keep) out << l << '\n';
}

std::ofstream open_log(const fs::path& path, bool resume, int start_epoch, const std::string& preamble) {
    if (resume && fs::exists(path)) {
        truncate_log(path, start_epoch);
        std::ofstream out(path, std::ios::app);
        if (!out) throw Error("cannot append to " + path.string());
        return out;
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << preamble;
    return out;
}

const std::string& meta(const model::CheckpointContents& c, const std::string& key) {
    auto it = c.metadata.find(key);
    if (it == c.metadata.end()) throw CheckpointError("checkpoint lacks training state '" + key + "' (not resumable)");
    return it->second;
}

}  // namespace

RunResult run_training(const data::DatasetManifest& manifest, const core::ExperimentConfig& cfg, const RunOptions& options) {
    cfg.validate();
    std::error_code ec;
    fs::create_directories(options.out_dir, ec);
    if (ec) throw Error(options.out_dir.string() + ": cannot create run directory");

    const auto load = data::LoadOptions::from_config(cfg);
    const data::SliceDataset train_ds = data::SliceDataset::load(manifest, data::Split::Train, load);
    data::UnpairedSampler sampler(train_ds, cfg.mask_mode, cfg.seed, cfg.augment);
    core::Rng rng = core::Rng::derive(cfg.seed, 2);

    model::NetworkSet nets = model::NetworkSet::create(cfg, options.role, cfg.seed);
    std::optional<model::NetworkSet> teacher;
    if (options.role == model::Role::Student) {
        if (!options.teacher_checkpoint) throw InvalidInput("student training needs a teacher checkpoint");
        const auto tc = model::read_checkpoint(*options.teacher_checkpoint);
        if (tc.role != model::Role::Teacher) throw InvalidInput(options.teacher_checkpoint->string() + " is not a teacher checkpoint");
        if (tc.config.depth != cfg.depth || tc.config.base_channels != cfg.base_channels ||
            tc.config.resolution != cfg.resolution) {
            throw ShapeMismatch("teacher and student differ in depth, width or resolution; their features cannot be compared");
        }
        teacher = model::networks_from(tc);
        freeze(*teacher);
    }
    Optimizers opt = Optimizers::create(nets, cfg);

    TrainState state;
    state.role = options.role;
    const bool resume = options.resume_from.has_value();
    if (resume) {
        const auto c = model::read_checkpoint(*options.resume_from);
        if (c.role != options.role) throw InvalidInput("resume: checkpoint role differs from the requested role");
        if (!(c.config == cfg)) throw InvalidInput("resume: checkpoint config differs from the run config");
        model::restore_networks(nets, c);
        opt.load_state(nets, c);
        state.epoch = c.epoch;
        state.step = std::stol(meta(c, "train.step"));
        rng.set_state(meta(c, "train.trainer_rng"));
        sampler.rng().set_state(meta(c, "train.sampler_rng"));
    }

    cfg.save(options.out_dir / "config.resolved");
    const std::string stamp = "# config_hash=" + cfg.hash() + " role=" + std::string(model::to_string(options.role)) + "\n";
    std::ofstream log = open_log(options.out_dir / "losses.csv", resume, state.epoch, stamp + losses::csv_header() + "\n");

    std::optional<data::SliceDataset> val_ds;
    std::vector<SliceRef> val_refs;
    std::ofstream val_log;
    if (options.validation_slices > 0 && !manifest.split(data::Split::Val).empty()) {
        val_ds = data::SliceDataset::load(manifest, data::Split::Val, load);
        val_refs = pick_slices(*val_ds, options.validation_slices);
        val_log = open_log(options.out_dir / "validation.csv", resume, state.epoch, stamp + "epoch,val_ssim\n");
    }
    const std::vector<SliceRef> sample_refs = pick_slices(val_ds ? *val_ds : train_ds, 4);

    RunResult result;
    const int k = cfg.critic_steps_per_gen_step;
    for (int epoch = state.epoch; epoch < cfg.epochs; ++epoch) {
        if (options.stop_after_epoch >= 0 && epoch >= options.stop_after_epoch) break;
        const auto t0 = std::chrono::steady_clock::now();
        EpochSummary summary;
        summary.epoch = epoch;
        summary.lr = lr_at_epoch(epoch, cfg);
        opt.set_lr(summary.lr);
        nets.train();

        sampler.begin_epoch();
        losses::LossBreakdown sum;
        long rows = 0;
        while (sampler.remaining() > 0 && (cfg.max_steps_per_epoch == 0 || summary.steps < cfg.max_steps_per_epoch)) {
            const Batch batch = Batch::from_items(sampler.next_batch(static_cast<std::size_t>(cfg.batch_size)));
            const bool update_generator = (state.step + 1) % k == 0;
            const losses::LossBreakdown b =
                teacher ? student_step(batch, nets, *teacher, opt, cfg, rng, update_generator)
                        : teacher_step(batch, nets, opt, cfg, rng, update_generator);
            ++state.step;
            ++summary.steps;
            if (!update_generator) continue;
            log << losses::csv_row(epoch, state.step, b) << '\n';
            sum += b;
            ++rows;
        }
        log.flush();
        summary.mean = rows ? sum.scaled(1.0 / static_cast<double>(rows)) : losses::LossBreakdown{};
        state.epoch = epoch + 1;
        state.running = summary.mean;
        state.running_count = rows;

        nets.eval();
        if (val_ds && !val_refs.empty()) {
            summary.val_ssim = validation_ssim(nets, *val_ds, val_refs, cfg.mask_mode, cfg.seed);
            val_log << epoch << ',' << losses::format_double(*summary.val_ssim) << '\n';
            val_log.flush();
        }

        const bool last = state.epoch == cfg.epochs;
        const bool stopping = options.stop_after_epoch >= 0 && state.epoch == options.stop_after_epoch;
        if (state.epoch % cfg.checkpoint_every == 0 || last || stopping) {
            model::CheckpointContents c = model::snapshot(nets, cfg, state.epoch);
            opt.save_state(nets, c.tensors, c.metadata);
            c.metadata["train.role"] = std::string(model::to_string(state.role));
            c.metadata["train.step"] = std::to_string(state.step);
            c.metadata["train.trainer_rng"] = rng.state();
            c.metadata["train.sampler_rng"] = sampler.rng().state();
            c.metadata["train.running_count"] = std::to_string(state.running_count);
            const auto cols = losses::LossBreakdown::columns();
            const auto vals = state.running.values();
            for (std::size_t i = 0; i < cols.size(); ++i) c.metadata["train.running." + cols[i]] = losses::format_double(vals[i]);
            const fs::path path = options.out_dir / checkpoint_name(state.epoch);
            model::write_checkpoint(path, c);
            result.final_checkpoint = path;
            if (last) {
                fs::copy_file(path, options.out_dir / "final.utad", fs::copy_options::overwrite_existing);
                result.final_checkpoint = options.out_dir / "final.utad";
            }
            if (options.write_samples) {
                char name[40];
                std::snprintf(name, sizeof name, "samples_e%03d.png", state.epoch);
                write_samples(options.out_dir / name, nets, val_ds ? *val_ds : train_ds, sample_refs, cfg.mask_mode, cfg.seed);
            }
        }
        summary.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.epochs.push_back(summary);
        if (options.on_epoch) options.on_epoch(summary);
    }
    result.state = state;
    return result;
}

}  // namespace utad::train
