#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "cli.hpp"
#include "utad/data/dataset.hpp"
#include "utad/data/phantom.hpp"
#include "utad/data/preprocess.hpp"
#include "utad/error.hpp"
#include "utad/eval/metrics.hpp"
#include "utad/eval/report.hpp"
#include "utad/io/png.hpp"
#include "utad/losses/losses.hpp"
#include "utad/model/checkpoint.hpp"
#include "utad/model/tensors.hpp"
#include "utad/train/trainer.hpp"

namespace utad::cli {

namespace fs = std::filesystem;
using core::ExperimentConfig;

namespace {

// One option per config key; unset ones leave the base config alone.
struct ConfigFlags {
    std::string file;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;

    void attach(CLI::App* sub) {
        sub->add_option("--config", file, "config file (key = value lines)")->check(CLI::ExistingFile);
        for (const auto& key : ExperimentConfig::keys()) {
            std::string names = "--" + kebab(key);
            if (key == "student_scheme") names += ",--scheme";
            options[key] = sub->add_option(names, values[key], "config key " + key);
        }
    }

    bool given(const std::string& key) const { return options.at(key)->count() > 0; }

    ExperimentConfig resolve(const ExperimentConfig& base) const {
        ExperimentConfig cfg = base;
        if (!file.empty()) cfg = ExperimentConfig::load(file);
        for (const auto& [key, opt] : options) {
            if (opt->count() == 0) continue;
            try {
                cfg.set(key, values.at(key));
            } catch (const InvalidInput& e) {
                throw UsageError("--" + kebab(key) + ": " + e.what());
            }
        }
        try {
            cfg.validate();
        } catch (const InvalidInput& e) {
            throw UsageError(e.what());
        }
        return cfg;
    }
};

data::DatasetManifest load_manifest(const fs::path& data) {
    const fs::path path = fs::is_directory(data) ? data / "manifest.txt" : data;
    return data::DatasetManifest::load(path);
}

data::Split split_arg(const std::string& s) {
    const auto split = data::parse_split(s);
    if (!split) throw UsageError("unknown split '" + s + "' (train, val, test)");
    return *split;
}

core::Modality modality_arg(const std::string& s) {
    const auto m = core::parse_modality(s);
    if (!m) throw UsageError("unknown modality '" + s + "' (flair, t1, t1ce, t2)");
    return *m;
}

fs::path make_run_dir(const fs::path& requested) {
    const fs::path dir = fresh_run_dir(requested);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(dir.string() + ": cannot create directory");
    if (dir != requested) std::cerr << "note: " << requested.string() << " is not empty, writing to " << dir.string() << '\n';
    return dir;
}

// Writes the manifest before and after `body`, recording failures too.
template <class F>
void with_manifest(RunManifest& m, const fs::path& dir, F&& body) {
    m.started = timestamp_now();
    m.write(dir);
    try {
        body();
    } catch (...) {
        m.status = "failed";
        m.finished = timestamp_now();
        m.write(dir);
        throw;
    }
    m.status = "completed";
    m.finished = timestamp_now();
    m.write(dir);
}

// ---------------------------------------------------------------- phantom-gen

struct PhantomArgs {
    std::string out;
    data::PhantomOptions options;
    int val = 2;
    int test = 2;
};

void cmd_phantom_gen(const PhantomArgs& a) {
    const int train = a.options.subjects - a.val - a.test;
    if (train < 1) throw UsageError("--subjects must exceed --val + --test");
    const fs::path root = a.out;
    data::generate_phantom(a.options, root);
    auto manifest = data::DatasetManifest::scan(root, {train, a.val, a.test}, a.options.seed);
    const fs::path abs_root = fs::absolute(root);
    for (auto& r : manifest.subjects) {
        for (auto& v : r.volumes) v = fs::relative(v, abs_root);
        r.labels = fs::relative(r.labels, abs_root);
    }
    manifest.save(root / "manifest.txt");
    std::cout << "wrote " << a.options.subjects << " subjects (train " << train << ", val " << a.val << ", test " << a.test
              << ") to " << root.string() << '\n';
}

// ---------------------------------------------------------------------- train

struct TrainArgs {
    std::string role = "teacher";
    std::string data, out;  // empty: runs/train, or the resumed run's directory
    std::string teacher_checkpoint, resume;
    int stop_after_epoch = -1;
    int validation_slices = 32;
    bool no_samples = false;
    ConfigFlags cfg;
};

void cmd_train(const TrainArgs& a, const std::vector<std::string>& argv) {
    const auto role = model::parse_role(a.role);
    if (!role) throw UsageError("--role must be teacher or student");
    if (*role == model::Role::Student && a.teacher_checkpoint.empty()) {
        throw UsageError("student training needs --teacher-checkpoint");
    }
    if (*role == model::Role::Teacher && !a.teacher_checkpoint.empty()) {
        throw UsageError("--teacher-checkpoint only applies to --role student");
    }

    // Students start from the teacher's settings, mask mode included.
    ExperimentConfig base;
    if (!a.teacher_checkpoint.empty()) base = model::read_checkpoint(a.teacher_checkpoint).config;
    if (!a.resume.empty()) base = model::read_checkpoint(a.resume).config;
    const ExperimentConfig cfg = a.cfg.resolve(base);

    fs::path dir;
    if (!a.resume.empty()) {
        dir = a.out.empty() ? fs::path(a.resume).parent_path() : fs::path(a.out);
        fs::create_directories(dir);
    } else {
        dir = make_run_dir(a.out.empty() ? "runs/train" : a.out);
    }
    const auto manifest = load_manifest(a.data);

    RunManifest m;
    if (!a.resume.empty() && fs::exists(dir / "run.json")) m = RunManifest::read(dir);
    m.command = "train";
    m.argv = argv;
    m.set_config(cfg);
    m.inputs["data"] = fs::absolute(a.data).string();
    if (!a.teacher_checkpoint.empty()) m.inputs["teacher_checkpoint"] = fs::absolute(a.teacher_checkpoint).string();
    if (!a.resume.empty()) m.inputs["resume"] = fs::absolute(a.resume).string();

    train::RunOptions opts;
    opts.out_dir = dir;
    opts.role = *role;
    if (!a.teacher_checkpoint.empty()) opts.teacher_checkpoint = a.teacher_checkpoint;
    if (!a.resume.empty()) opts.resume_from = a.resume;
    opts.stop_after_epoch = a.stop_after_epoch;
    opts.write_samples = !a.no_samples;
    opts.validation_slices = a.validation_slices;
    opts.on_epoch = [&](const train::EpochSummary& s) {
        std::cout << "epoch " << s.epoch + 1 << '/' << cfg.epochs << "  lr " << s.lr << "  steps " << s.steps
                  << "  D_g " << s.mean.total_D_g << "  G " << s.mean.total_G;
        if (s.val_ssim) std::cout << "  val_ssim " << *s.val_ssim;
        std::cout << "  (" << std::lround(s.seconds) << " s)" << std::endl;
    };

    with_manifest(m, dir, [&] {
        const auto result = train::run_training(manifest, cfg, opts);
        m.outputs["losses"] = (dir / "losses.csv").string();
        m.outputs["config"] = (dir / "config.resolved").string();
        if (!result.final_checkpoint.empty()) m.outputs["checkpoint"] = result.final_checkpoint.string();
        std::cout << "run directory: " << dir.string() << '\n';
    });
}

// ------------------------------------------------------------------ translate

struct TranslateArgs {
    std::string checkpoint, input, mask, out = "runs/translate";
    std::string source, target;
};

bool is_png(const fs::path& p) { return p.extension() == ".png"; }

core::ImageSlice png_to_unit(const io::RgbImage& img) {
    core::ImageSlice s(img.height, img.width, core::IntensitySpace::Unit);
    for (std::size_t i = 0; i < s.size(); ++i) s.pixels[i] = img.rgb[3 * i] / 255.0f;
    return s;
}

void cmd_translate(const TranslateArgs& a, const std::vector<std::string>& argv) {
    const core::Modality source = modality_arg(a.source);
    const core::Modality target = modality_arg(a.target);
    const auto contents = model::read_checkpoint(a.checkpoint);
    const ExperimentConfig& cfg = contents.config;
    const bool teacher = contents.role == model::Role::Teacher;
    if (teacher && a.mask.empty()) {
        throw UsageError("teacher checkpoints translate with guidance: pass --mask (label volume or mask PNG)");
    }
    model::NetworkSet nets = model::networks_from(contents);
    nets.eval();
    const int res = cfg.resolution;

    // Source slices in [0,1] at the network resolution, plus per-slice masks.
    std::vector<core::ImageSlice> slices;
    std::vector<core::TumorMask> masks;
    data::Volume volume;
    core::Rng rng = core::Rng::derive(cfg.seed, 0x7a45);
    if (is_png(a.input)) {
        slices.push_back(data::resize_bilinear(png_to_unit(io::read_png(a.input)), res, res));
        if (teacher) {
            if (!is_png(a.mask)) throw UsageError("a PNG input takes a PNG --mask");
            const auto m = io::read_png(a.mask);
            core::LabelSlice l{m.height, m.width, std::vector<std::uint8_t>(static_cast<std::size_t>(m.width) * m.height)};
            for (std::size_t i = 0; i < l.labels.size(); ++i) l.labels[i] = m.rgb[3 * i] > 0 ? core::label::kEdema : 0;
            masks.push_back(data::guidance_mask(data::resize_nearest(l, res, res), cfg.mask_mode, rng));
        }
    } else {
        volume = data::load_volume(a.input);
        const auto window = data::fit_intensity_window(volume, cfg.clip_low_percentile, cfg.clip_high_percentile);
        for (int z = 0; z < volume.depth; ++z) slices.push_back(data::preprocess(volume.slice(z), window, res));
        if (teacher) {
            const auto labels = data::load_volume(a.mask);
            if (labels.depth != volume.depth || labels.height != volume.height || labels.width != volume.width) {
                throw ShapeMismatch("--mask volume does not match --input");
            }
            for (int z = 0; z < labels.depth; ++z) {
                masks.push_back(data::guidance_mask(data::resize_nearest(labels.label_slice(z), res, res), cfg.mask_mode, rng));
            }
        }
    }

    const fs::path dir = make_run_dir(a.out);
    RunManifest m;
    m.command = "translate";
    m.argv = argv;
    m.set_config(cfg);
    m.inputs = {{"checkpoint", fs::absolute(a.checkpoint).string()}, {"input", fs::absolute(a.input).string()}};
    if (!a.mask.empty()) m.inputs["mask"] = fs::absolute(a.mask).string();

    with_manifest(m, dir, [&] {
        torch::NoGradGuard no_grad;
        std::vector<core::ImageSlice> whole, tumor;
        for (std::size_t b0 = 0; b0 < slices.size(); b0 += 16) {
            const std::size_t b1 = std::min(slices.size(), b0 + 16);
            const std::vector<core::ImageSlice> chunk(slices.begin() + b0, slices.begin() + b1);
            const auto x = model::stack_images(chunk) * 2 - 1;
            const auto cond = model::one_hot_condition(model::modality_indices(target, x.size(0)));
            model::TranslationOutput out;
            if (teacher) {
                const std::vector<core::TumorMask> mchunk(masks.begin() + b0, masks.begin() + b1);
                out = model::teacher_forward(nets.generator, x, model::mask_network(x, model::stack_masks(mchunk)), cond);
            } else {
                out = model::student_forward(nets.generator, x, cond);
            }
            for (std::int64_t i = 0; i < x.size(0); ++i) {
                whole.push_back(model::to_image(((out.whole + 1) / 2).clamp(0, 1), core::IntensitySpace::Unit, i));
                if (out.has_tumor()) tumor.push_back(model::to_image(((out.tumor + 1) / 2).clamp(0, 1), core::IntensitySpace::Unit, i));
            }
        }

        const std::string stem = std::string(core::to_string(source)) + "_to_" + std::string(core::to_string(target));
        auto write = [&](const std::vector<core::ImageSlice>& imgs, const std::string& name) {
            if (imgs.empty()) return;
            if (is_png(a.input)) {
                io::RgbImage img(res, res);
                img.paste_gray(imgs[0], 0, 0, 0, 1);
                io::write_png(dir / (name + ".png"), img);
                m.outputs[name] = (dir / (name + ".png")).string();
                return;
            }
            data::Spacing sp = volume.spacing;
            sp.y *= static_cast<double>(volume.height) / res;
            sp.x *= static_cast<double>(volume.width) / res;
            data::Volume v(volume.depth, res, res, sp);
            v.subject_id = volume.subject_id;
            v.modality = target;
            for (int z = 0; z < v.depth; ++z) {
                std::copy(imgs[z].pixels.begin(), imgs[z].pixels.end(), v.voxels.begin() + static_cast<std::ptrdiff_t>(z * v.slice_size()));
            }
            data::save_volume(dir / (name + ".nii.gz"), v);
            m.outputs[name] = (dir / (name + ".nii.gz")).string();
        };
        write(whole, stem);
        write(tumor, stem + "_tumor");

        // Preview of the middle slice: source | translation | tumor branch.
        const std::size_t mid = slices.size() / 2;
        io::RgbImage preview(3 * res + 4, res, 32);
        preview.paste_gray(slices[mid], 0, 0, 0, 1);
        preview.paste_gray(whole[mid], 0, res + 2, 0, 1);
        if (!tumor.empty()) preview.paste_gray(tumor[mid], 0, 2 * res + 4, 0, 1);
        io::write_png(dir / "preview.png", preview);
        m.outputs["preview"] = (dir / "preview.png").string();
        std::cout << "translated " << slices.size() << " slice(s) into " << dir.string() << '\n';
    });
}

// ------------------------------------------------------------------- evaluate

struct EvaluateArgs {
    std::string checkpoint, data, split = "test", out = "runs/evaluate", perceptual = "surrogate";
    bool identity = false;
    bool no_error_maps = false;
    int batch_size = 16;
    ConfigFlags cfg;
};

void cmd_evaluate(const EvaluateArgs& a, const std::vector<std::string>& argv) {
    if (a.identity == !a.checkpoint.empty()) throw UsageError("pass exactly one of --checkpoint and --identity");
    const data::Split split = split_arg(a.split);
    const auto manifest = load_manifest(a.data);
    if (manifest.split(split).empty()) throw InvalidInput("the manifest has no " + a.split + " subjects (no paired ground truth)");

    eval::EvalOptions opts;
    opts.extractor = eval::make_extractor(a.perceptual);
    opts.batch_size = a.batch_size;
    const fs::path dir = make_run_dir(a.out);
    if (!a.no_error_maps) opts.error_map_dir = dir / "error_maps";

    RunManifest m;
    m.command = "evaluate";
    m.argv = argv;
    m.inputs["data"] = fs::absolute(a.data).string();
    ExperimentConfig cfg;
    if (a.identity) {
        cfg = a.cfg.resolve({});
    } else {
        cfg = model::read_checkpoint(a.checkpoint).config;
        m.inputs["checkpoint"] = fs::absolute(a.checkpoint).string();
    }
    m.set_config(cfg);

    with_manifest(m, dir, [&] {
        eval::MetricsReport report;
        if (a.identity) {
            const auto ds = data::SliceDataset::load(manifest, split, data::LoadOptions::from_config(cfg));
            report = eval::evaluate_translation(ds, eval::identity_translator(), opts);
            report.checkpoint = "none";
            report.config_hash = cfg.hash();
            report.split = a.split;
            report.translator = "identity";
        } else {
            report = eval::evaluate_checkpoint(a.checkpoint, manifest, split, opts);
        }
        report.write_csv(dir / "metrics.csv");
        report.write_json(dir / "metrics.json");
        m.outputs["csv"] = (dir / "metrics.csv").string();
        m.outputs["json"] = (dir / "metrics.json").string();
        const auto& g = report.aggregate;
        std::cout << report.translator << " on " << a.split << ": SSIM " << g.ssim.mean << "  PSNR " << g.psnr.mean
                  << "  local SSIM " << g.local_ssim.mean << "  local PSNR " << g.local_psnr.mean << '\n'
                  << "report: " << (dir / "metrics.csv").string() << '\n';
    });
}

// ---------------------------------------------------------------- seg-metrics

struct SegArgs {
    std::vector<std::string> pred, gt;
    std::vector<std::string> regions{"wt", "tc", "et"};
    std::string out = "runs/seg-metrics";
};

void cmd_seg_metrics(const SegArgs& a, const std::vector<std::string>& argv) {
    if (a.pred.size() != a.gt.size()) throw UsageError("--pred and --gt must be given the same number of times");
    std::vector<core::TumorRegion> regions;
    for (const auto& r : a.regions) {
        const auto region = core::parse_region(r);
        if (!region) throw UsageError("unknown region '" + r + "' (wt, tc, et)");
        regions.push_back(*region);
    }
    const fs::path dir = make_run_dir(a.out);
    RunManifest m;
    m.command = "seg-metrics";
    m.argv = argv;
    m.config_hash = "none";
    for (std::size_t i = 0; i < a.pred.size(); ++i) {
        m.inputs["pred." + std::to_string(i)] = fs::absolute(a.pred[i]).string();
        m.inputs["gt." + std::to_string(i)] = fs::absolute(a.gt[i]).string();
    }

    with_manifest(m, dir, [&] {
        std::ofstream csv(dir / "seg_metrics.csv");
        csv << "# config_hash=none\npred,gt,region,dsc,assd_mm,hd95_mm\n";
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t i = 0; i < a.pred.size(); ++i) {
            const auto pred = data::load_volume(a.pred[i]);
            const auto gt = data::load_volume(a.gt[i]);
            if (pred.depth != gt.depth || pred.height != gt.height || pred.width != gt.width) {
                throw ShapeMismatch(a.pred[i] + " and " + a.gt[i] + " differ in shape");
            }
            for (const auto region : regions) {
                const auto p = eval::BinaryVolume::from_labels(pred, region);
                const auto g = eval::BinaryVolume::from_labels(gt, region);
                const double d = eval::dsc(p, g);
                std::optional<eval::SurfaceDistances> sd;
                if (p.count() > 0 && g.count() > 0) sd = eval::surface_distances(p, g, gt.spacing);
                const std::string name(core::to_string(region));
                csv << a.pred[i] << ',' << a.gt[i] << ',' << name << ',' << losses::format_double(d) << ','
                    << (sd ? losses::format_double(sd->assd) : "") << ',' << (sd ? losses::format_double(sd->hd95) : "") << '\n';
                nlohmann::json row = {{"pred", a.pred[i]}, {"gt", a.gt[i]}, {"region", name}, {"dsc", d}};
                row["assd_mm"] = sd ? nlohmann::json(sd->assd) : nlohmann::json(nullptr);
                row["hd95_mm"] = sd ? nlohmann::json(sd->hd95) : nlohmann::json(nullptr);
                rows.push_back(row);
                std::cout << a.pred[i] << " vs " << a.gt[i] << " [" << name << "]  DSC " << d;
                if (sd) std::cout << "  ASSD " << sd->assd << "  HD95 " << sd->hd95;
                else std::cout << "  (surface distances undefined: empty mask)";
                std::cout << '\n';
            }
        }
        std::ofstream(dir / "seg_metrics.json")
            << nlohmann::json{{"config_hash", "none"}, {"distance_unit", "mm"}, {"rows", rows}}.dump(2) << '\n';
        m.outputs["csv"] = (dir / "seg_metrics.csv").string();
        m.outputs["json"] = (dir / "seg_metrics.json").string();
    });
}

// -------------------------------------------------------------- feature-error

struct FeatureArgs {
    std::string teacher, data, split = "test", out = "runs/feature-error";
    std::vector<std::string> students;
    int batch_size = 16;
};

std::string scheme_label(core::StudentScheme s) {
    switch (s) {
        case core::StudentScheme::A: return "teacher-structure";
        case core::StudentScheme::B: return "global-only";
        case core::StudentScheme::C: return "no-local-encoder";
        case core::StudentScheme::D: return "no-local-decoder";
    }
    return "";
}

// Per-channel errors laid out on a near-square grid.
core::ImageSlice error_grid(const std::vector<double>& map) {
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(map.size()))));
    const int rows = (static_cast<int>(map.size()) + cols - 1) / cols;
    core::ImageSlice s(rows, cols, core::IntensitySpace::Unit);
    for (std::size_t i = 0; i < map.size(); ++i) s.pixels[i] = static_cast<float>(map[i]);
    return s;
}

void cmd_feature_error(const FeatureArgs& a, const std::vector<std::string>& argv) {
    const data::Split split = split_arg(a.split);
    const auto teacher_contents = model::read_checkpoint(a.teacher);
    if (teacher_contents.role != model::Role::Teacher) throw InvalidInput(a.teacher + " is not a teacher checkpoint");
    const auto manifest = load_manifest(a.data);
    const fs::path dir = make_run_dir(a.out);

    RunManifest m;
    m.command = "feature-error";
    m.argv = argv;
    m.set_config(teacher_contents.config);
    m.inputs = {{"teacher", fs::absolute(a.teacher).string()}, {"data", fs::absolute(a.data).string()}};
    for (std::size_t i = 0; i < a.students.size(); ++i) m.inputs["student." + std::to_string(i)] = fs::absolute(a.students[i]).string();

    with_manifest(m, dir, [&] {
        model::NetworkSet teacher = model::networks_from(teacher_contents);
        teacher.eval();
        const auto ds = data::SliceDataset::load(manifest, split, data::LoadOptions::from_config(teacher_contents.config));
        std::vector<eval::FeatureErrorResult> results;
        std::vector<std::string> hashes;
        for (const auto& path : a.students) {
            const auto sc = model::read_checkpoint(path);
            if (sc.role != model::Role::Student) throw InvalidInput(path + " is not a student checkpoint");
            model::NetworkSet student = model::networks_from(sc);
            student.eval();
            auto r = eval::scheme_feature_error(ds, teacher, teacher_contents.config.mask_mode, student, a.batch_size,
                                                teacher_contents.config.seed);
            r.scheme = sc.scheme;
            results.push_back(std::move(r));
            hashes.push_back(sc.config.hash());
        }

        double hi = 0;
        for (const auto& r : results) {
            for (double v : r.error_map) hi = std::max(hi, v);
        }
        std::ofstream csv(dir / "feature_error.csv");
        csv << "# config_hash=" << teacher_contents.config.hash() << '\n'
            << "scheme,label,mae,mse,channels,student_config_hash\n";
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t i = 0; i < results.size(); ++i) {
            const auto& r = results[i];
            const std::string scheme(core::to_string(r.scheme));
            csv << scheme << ',' << scheme_label(r.scheme) << ',' << losses::format_double(r.mae) << ','
                << losses::format_double(r.mse) << ',' << r.error_map.size() << ',' << hashes[i] << '\n';
            rows.push_back({{"scheme", scheme}, {"label", scheme_label(r.scheme)}, {"mae", r.mae}, {"mse", r.mse},
                            {"error_map", r.error_map}, {"student_config_hash", hashes[i]}});

            const auto grid = error_grid(r.error_map);
            const int scale = 16;
            io::RgbImage img(grid.width * scale, grid.height * scale);
            img.paste_heat(grid, 0, 0, 0, hi > 0 ? hi : 1, scale);
            const fs::path png = dir / ("error_map_" + scheme + ".png");
            io::write_png(png, img);
            m.outputs["error_map_" + scheme] = png.string();
            std::cout << "scheme " << scheme << " (" << scheme_label(r.scheme) << ")  MAE " << r.mae << "  MSE " << r.mse << '\n';
        }
        std::ofstream(dir / "feature_error.json")
            << nlohmann::json{{"config_hash", teacher_contents.config.hash()}, {"split", a.split}, {"heat_scale_max", hi}, {"rows", rows}}
                   .dump(2)
            << '\n';
        m.outputs["csv"] = (dir / "feature_error.csv").string();
        m.outputs["json"] = (dir / "feature_error.json").string();
    });
}

}  // namespace

int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

int run(int argc, const char* const* argv) {
    CLI::App app{"Mask-guided unpaired MRI modality translation with teacher-student distillation"};
    app.require_subcommand(1);
    int threads = 1;
    app.add_option("--threads", threads, "torch intra-op threads (1 keeps runs reproducible)")->check(CLI::PositiveNumber);

    PhantomArgs ph;
    auto* phantom = app.add_subcommand("phantom-gen", "write a synthetic four-modality dataset with a manifest");
    phantom->add_option("--out", ph.out, "dataset directory")->required();
    phantom->add_option("--seed", ph.options.seed);
    phantom->add_option("--subjects", ph.options.subjects)->check(CLI::PositiveNumber);
    phantom->add_option("--depth", ph.options.depth)->check(CLI::PositiveNumber);
    phantom->add_option("--height", ph.options.height)->check(CLI::PositiveNumber);
    phantom->add_option("--width", ph.options.width)->check(CLI::PositiveNumber);
    phantom->add_option("--noise", ph.options.noise)->check(CLI::NonNegativeNumber);
    phantom->add_option("--val", ph.val, "validation subjects")->check(CLI::NonNegativeNumber);
    phantom->add_option("--test", ph.test, "test subjects")->check(CLI::NonNegativeNumber);

    TrainArgs tr;
    auto* train = app.add_subcommand("train", "train a teacher or a student");
    train->add_option("--role", tr.role)->check(CLI::IsMember({"teacher", "student"}));
    train->add_option("--data", tr.data, "dataset directory or manifest file")->required()->check(CLI::ExistingPath);
    train->add_option("--out", tr.out, "run directory (suffixed -1, -2, ... if not empty)");
    train->add_option("--teacher-checkpoint", tr.teacher_checkpoint)->check(CLI::ExistingFile);
    train->add_option("--resume", tr.resume, "continue from a checkpoint of this run")->check(CLI::ExistingFile);
    train->add_option("--stop-after-epoch", tr.stop_after_epoch, "stop once this many epochs are complete");
    train->add_option("--validation-slices", tr.validation_slices)->check(CLI::NonNegativeNumber);
    train->add_flag("--no-samples", tr.no_samples, "skip PNG sample grids");
    tr.cfg.attach(train);

    TranslateArgs tl;
    auto* translate = app.add_subcommand("translate", "translate a volume or PNG slice with a checkpoint");
    translate->add_option("--checkpoint", tl.checkpoint)->required()->check(CLI::ExistingFile);
    translate->add_option("--input", tl.input, "NIfTI volume or PNG slice")->required()->check(CLI::ExistingFile);
    translate->add_option("--source", tl.source, "source modality")->required();
    translate->add_option("--target", tl.target, "target modality")->required();
    translate->add_option("--mask", tl.mask, "label volume / mask PNG (teacher checkpoints)")->check(CLI::ExistingFile);
    translate->add_option("--out", tl.out);

    EvaluateArgs ev;
    auto* evaluate = app.add_subcommand("evaluate", "image-quality report over the 12 directed modality pairs");
    evaluate->add_option("--checkpoint", ev.checkpoint)->check(CLI::ExistingFile);
    evaluate->add_flag("--identity", ev.identity, "score the untranslated source (baseline)");
    evaluate->add_option("--data", ev.data)->required()->check(CLI::ExistingPath);
    evaluate->add_option("--split", ev.split);
    evaluate->add_option("--out", ev.out);
    evaluate->add_option("--perceptual", ev.perceptual, "none, surrogate, or a TorchScript feature module");
    evaluate->add_flag("--no-error-maps", ev.no_error_maps);
    evaluate->add_option("--eval-batch", ev.batch_size, "slices per forward pass")->check(CLI::PositiveNumber);
    ev.cfg.attach(evaluate);

    SegArgs sg;
    auto* seg = app.add_subcommand("seg-metrics", "DSC, ASSD and HD95 between label volumes");
    seg->add_option("--pred", sg.pred, "predicted label volume (repeat for pairs)")->required()->check(CLI::ExistingFile);
    seg->add_option("--gt", sg.gt, "ground-truth label volume (same order as --pred)")->required()->check(CLI::ExistingFile);
    seg->add_option("--region", sg.regions, "wt, tc, et")->delimiter(',');
    seg->add_option("--out", sg.out);

    FeatureArgs fe;
    auto* feature = app.add_subcommand("feature-error", "teacher vs student feature error per student scheme");
    feature->add_option("--teacher", fe.teacher)->required()->check(CLI::ExistingFile);
    feature->add_option("--student", fe.students, "student checkpoint (repeat per scheme)")->required()->check(CLI::ExistingFile);
    feature->add_option("--data", fe.data)->required()->check(CLI::ExistingPath);
    feature->add_option("--split", fe.split);
    feature->add_option("--out", fe.out);
    feature->add_option("--batch-size", fe.batch_size)->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    const std::vector<std::string> args(argv, argv + argc);
    try {
        torch::set_num_threads(threads);
        if (phantom->parsed()) cmd_phantom_gen(ph);
        else if (train->parsed()) cmd_train(tr, args);
        else if (translate->parsed()) cmd_translate(tl, args);
        else if (evaluate->parsed()) cmd_evaluate(ev, args);
        else if (seg->parsed()) cmd_seg_metrics(sg, args);
        else if (feature->parsed()) cmd_feature_error(fe, args);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitOk;
}

}  // namespace utad::cli
