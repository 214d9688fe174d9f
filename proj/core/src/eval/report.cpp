#include "utad/eval/report.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "utad/core/rng.hpp"
#include "utad/error.hpp"
#include "utad/io/png.hpp"
#include "utad/losses/losses.hpp"
#include "utad/model/checkpoint.hpp"
#include "utad/model/tensors.hpp"

namespace utad::eval {

namespace fs = std::filesystem;
using core::Modality;

MeanStd MeanStd::of(const std::vector<double>& values) {
    MeanStd m;
    m.n = values.size();
    if (values.empty()) return m;
    double sum = 0;
    for (double v : values) sum += v;
    m.mean = sum / static_cast<double>(values.size());
    if (!std::isfinite(m.mean)) return m;
    double sq = 0;
    for (double v : values) sq += (v - m.mean) * (v - m.mean);
    m.std = std::sqrt(sq / static_cast<double>(values.size()));
    return m;
}

const PairMetrics& MetricsReport::pair(Modality source, Modality target) const {
    for (const auto& p : pairs) {
        if (p.source == source && p.target == target) return p;
    }
    throw InvalidInput("report has no pair " + std::string(core::to_string(source)) + "->" + std::string(core::to_string(target)));
}

namespace {

std::string modality_or_all(const std::optional<Modality>& m) { return m ? std::string(core::to_string(*m)) : "all"; }

nlohmann::json number(double v) {
    if (std::isfinite(v)) return v;
    return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
}

nlohmann::json to_json(const MeanStd& m) { return {{"mean", number(m.mean)}, {"std", number(m.std)}, {"n", m.n}}; }

struct Scores {
    std::vector<double> ssim, psnr, local_ssim, local_psnr, perceptual;
};

PairMetrics summarize(std::optional<Modality> s, std::optional<Modality> t, const Scores& sc, bool perceptual) {
    PairMetrics p;
    p.source = s;
    p.target = t;
    p.n = sc.ssim.size();
    p.n_local = sc.local_ssim.size();
    p.ssim = MeanStd::of(sc.ssim);
    p.psnr = MeanStd::of(sc.psnr);
    p.local_ssim = MeanStd::of(sc.local_ssim);
    p.local_psnr = MeanStd::of(sc.local_psnr);
    if (perceptual) p.perceptual = MeanStd::of(sc.perceptual);
    return p;
}

struct GridRow {
    core::ImageSlice source, generated, truth;
    core::TumorMask mask;
};

void write_error_grid(const fs::path& path, const std::vector<GridRow>& rows) {
    if (rows.empty()) return;
    const int h = rows.front().truth.height, w = rows.front().truth.width, gap = 2;
    const int columns = 6;
    io::RgbImage grid(columns * (w + gap) - gap, static_cast<int>(rows.size()) * (h + gap) - gap, 32);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const int y = static_cast<int>(r) * (h + gap);
        core::ImageSlice err(h, w, core::IntensitySpace::Unit);
        for (std::size_t i = 0; i < err.size(); ++i) err.pixels[i] = std::abs(row.generated.pixels[i] - row.truth.pixels[i]);
        grid.paste_gray(row.source, y, 0, 0, 1);
        grid.paste_gray(row.generated, y, (w + gap), 0, 1);
        grid.paste_gray(row.truth, y, 2 * (w + gap), 0, 1);
        grid.paste_heat(err, y, 3 * (w + gap), 0, 0.5);
        const Rect box = expand_rect(wt_bounding_box(row.mask), 11, h, w);
        const int scale = std::max(1, std::min(h / box.height(), w / box.width()));
        grid.paste_gray(crop(row.generated, box), y, 4 * (w + gap), 0, 1, scale);
        grid.paste_gray(crop(row.truth, box), y, 5 * (w + gap), 0, 1, scale);
    }
    io::write_png(path, grid);
}

}  // namespace

void MetricsReport::write_csv(const fs::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "# config_hash=" << config_hash << " checkpoint=" << checkpoint << " split=" << split
        << " translator=" << translator << " perceptual=" << perceptual_label << " std=per-sample intensity=unit\n";
    out << "source,target,n,ssim,ssim_std,psnr,psnr_std,n_local,local_ssim,local_ssim_std,local_psnr,local_psnr_std,"
           "perceptual,perceptual_std\n";
    auto f = losses::format_double;
    auto row = [&](const PairMetrics& p) {
        out << modality_or_all(p.source) << ',' << modality_or_all(p.target) << ',' << p.n << ',' << f(p.ssim.mean) << ','
            << f(p.ssim.std) << ',' << f(p.psnr.mean) << ',' << f(p.psnr.std) << ',' << p.n_local << ','
            << f(p.local_ssim.mean) << ',' << f(p.local_ssim.std) << ',' << f(p.local_psnr.mean) << ','
            << f(p.local_psnr.std) << ',' << (p.perceptual ? f(p.perceptual->mean) : "") << ','
            << (p.perceptual ? f(p.perceptual->std) : "") << '\n';
    };
    for (const auto& p : pairs) row(p);
    row(aggregate);
}

void MetricsReport::write_json(const fs::path& path) const {
    nlohmann::json doc;
    doc["metadata"] = {{"checkpoint", checkpoint},
                       {"config_hash", config_hash},
                       {"split", split},
                       {"translator", translator},
                       {"perceptual_extractor", perceptual_label},
                       {"intensity_space", "unit [0,1]"},
                       {"std", "per-sample standard deviation"},
                       {"aggregate", "mean of the 12 directed-pair means"}};
    auto entry = [&](const PairMetrics& p) {
        nlohmann::json j = {{"source", modality_or_all(p.source)},
                            {"target", modality_or_all(p.target)},
                            {"n", p.n},
                            {"n_local", p.n_local},
                            {"ssim", to_json(p.ssim)},
                            {"psnr", to_json(p.psnr)},
                            {"local_ssim", to_json(p.local_ssim)},
                            {"local_psnr", to_json(p.local_psnr)}};
        if (p.perceptual) j["perceptual"] = to_json(*p.perceptual);
        return j;
    };
    doc["pairs"] = nlohmann::json::array();
    for (const auto& p : pairs) doc["pairs"].push_back(entry(p));
    doc["aggregate"] = entry(aggregate);
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << doc.dump(2) << '\n';
}

Translator identity_translator() {
    return [](const torch::Tensor& source, const std::vector<core::LabelSlice>&, Modality) { return source; };
}

Translator network_translator(model::NetworkSet& nets, core::MaskMode mask_mode, std::uint64_t seed) {
    auto rng = std::make_shared<core::Rng>(core::Rng::derive(seed, 0xe7a1));
    model::Generator g = nets.generator;
    const bool teacher = nets.role == model::Role::Teacher;
    return [g, rng, mask_mode, teacher](const torch::Tensor& source, const std::vector<core::LabelSlice>& labels,
                                        Modality target) mutable {
        torch::NoGradGuard no_grad;
        const auto cond = model::one_hot_condition(model::modality_indices(target, source.size(0)));
        if (!teacher) return model::student_forward(g, source, cond).whole;
        std::vector<core::TumorMask> masks;
        for (const auto& l : labels) masks.push_back(data::guidance_mask(l, mask_mode, *rng));
        const auto tumor = model::mask_network(source, model::stack_masks(masks));
        return model::teacher_forward(g, source, tumor, cond).whole;
    };
}

MetricsReport evaluate_translation(const data::SliceDataset& ds, const Translator& translate, const EvalOptions& options) {
    struct Ref {
        std::size_t subject, slice;
    };
    std::vector<Ref> refs;
    for (std::size_t s = 0; s < ds.subjects.size(); ++s) {
        for (std::size_t k = 0; k < ds.subjects[s].num_slices(); ++k) refs.push_back({s, k});
    }
    if (refs.empty()) throw InvalidInput("evaluate: the split holds no slices");
    const bool perceptual = static_cast<bool>(options.extractor);
    if (options.error_map_dir) fs::create_directories(*options.error_map_dir);

    MetricsReport report;
    report.perceptual_label = perceptual ? options.extractor->label() : "none";
    Scores all;
    for (Modality s : core::kAllModalities) {
        for (Modality t : core::kAllModalities) {
            if (s == t) continue;
            Scores sc;
            std::vector<GridRow> grid;
            for (std::size_t b0 = 0; b0 < refs.size(); b0 += static_cast<std::size_t>(options.batch_size)) {
                const std::size_t b1 = std::min(refs.size(), b0 + static_cast<std::size_t>(options.batch_size));
                std::vector<core::ImageSlice> src;
                std::vector<core::LabelSlice> labels;
                for (std::size_t i = b0; i < b1; ++i) {
                    const auto& subj = ds.subjects[refs[i].subject];
                    src.push_back(subj.images[core::index_of(s)][refs[i].slice]);
                    labels.push_back(subj.labels[refs[i].slice]);
                }
                const torch::Tensor src_net = model::stack_images(src) * 2 - 1;
                const torch::Tensor out = translate(src_net, labels, t).detach().to(torch::kFloat32);
                if (!out.sizes().equals(src_net.sizes())) throw ShapeMismatch("translator changed the batch shape");
                const torch::Tensor out_unit = ((out + 1) / 2).clamp(0, 1);
                torch::Tensor dist;
                std::vector<core::ImageSlice> truths;
                for (std::size_t i = b0; i < b1; ++i) {
                    truths.push_back(ds.subjects[refs[i].subject].images[core::index_of(t)][refs[i].slice]);
                }
                if (perceptual) {
                    dist = perceptual_distance(out_unit * 2 - 1, model::stack_images(truths) * 2 - 1, *options.extractor);
                }
                for (std::size_t i = b0; i < b1; ++i) {
                    const auto j = static_cast<std::int64_t>(i - b0);
                    const core::ImageSlice gen = model::to_image(out_unit, core::IntensitySpace::Unit, j);
                    const core::ImageSlice& truth = truths[i - b0];
                    sc.ssim.push_back(ssim(gen, truth, options.ssim));
                    sc.psnr.push_back(psnr(gen, truth));
                    if (perceptual) sc.perceptual.push_back(dist[j].item<double>());
                    const core::TumorMask wt = core::compose_region(labels[i - b0], core::TumorRegion::WT);
                    if (wt.empty()) continue;
                    sc.local_ssim.push_back(local_metric(gen, truth, wt, LocalMetric::Ssim, options.ssim));
                    sc.local_psnr.push_back(local_metric(gen, truth, wt, LocalMetric::Psnr, options.ssim));
                    if (options.error_map_dir && static_cast<int>(grid.size()) < options.error_map_samples) {
                        grid.push_back({src[i - b0], gen, truth, wt});
                    }
                }
            }
            report.pairs.push_back(summarize(s, t, sc, perceptual));
            for (auto [dst, from] : {std::pair{&all.ssim, &sc.ssim}, {&all.psnr, &sc.psnr}, {&all.local_ssim, &sc.local_ssim},
                                     {&all.local_psnr, &sc.local_psnr}, {&all.perceptual, &sc.perceptual}}) {
                dst->insert(dst->end(), from->begin(), from->end());
            }
            if (options.error_map_dir) {
                write_error_grid(*options.error_map_dir / (std::string(core::to_string(s)) + "_to_" +
                                                           std::string(core::to_string(t)) + ".png"),
                                 grid);
            }
        }
    }

    // Aggregate: means are averaged over pairs; stds are per-sample over everything pooled.
    PairMetrics agg = summarize(std::nullopt, std::nullopt, all, perceptual);
    auto mean_of = [&](auto field) {
        double sum = 0;
        for (const auto& p : report.pairs) sum += field(p);
        return sum / static_cast<double>(report.pairs.size());
    };
    agg.ssim.mean = mean_of([](const PairMetrics& p) { return p.ssim.mean; });
    agg.psnr.mean = mean_of([](const PairMetrics& p) { return p.psnr.mean; });
    agg.local_ssim.mean = mean_of([](const PairMetrics& p) { return p.local_ssim.mean; });
    agg.local_psnr.mean = mean_of([](const PairMetrics& p) { return p.local_psnr.mean; });
    if (perceptual) agg.perceptual->mean = mean_of([](const PairMetrics& p) { return p.perceptual->mean; });
    report.aggregate = agg;
    return report;
}

MetricsReport evaluate_checkpoint(const fs::path& checkpoint, const data::DatasetManifest& manifest, data::Split split,
                                  const EvalOptions& options) {
    const auto contents = model::read_checkpoint(checkpoint);
    model::NetworkSet nets = model::networks_from(contents);
    nets.eval();
    const auto ds = data::SliceDataset::load(manifest, split, data::LoadOptions::from_config(contents.config));
    MetricsReport r = evaluate_translation(ds, network_translator(nets, contents.config.mask_mode, contents.config.seed), options);
    r.checkpoint = checkpoint.string();
    r.config_hash = contents.config.hash();
    r.split = std::string(data::to_string(split));
    r.translator = std::string(model::to_string(contents.role)) +
                   (contents.role == model::Role::Student ? "-" + std::string(core::to_string(contents.scheme)) : "");
    return r;
}

FeatureErrorResult scheme_feature_error(const data::SliceDataset& ds, model::NetworkSet& teacher,
                                        core::MaskMode teacher_mask_mode, model::NetworkSet& student, int batch_size,
                                        std::uint64_t seed) {
    torch::NoGradGuard no_grad;
    core::Rng rng = core::Rng::derive(seed, 0xfea7);
    FeatureErrorAccumulator acc;
    for (Modality s : core::kAllModalities) {
        for (const auto& subj : ds.subjects) {
            for (std::size_t b0 = 0; b0 < subj.num_slices(); b0 += static_cast<std::size_t>(batch_size)) {
                const std::size_t b1 = std::min(subj.num_slices(), b0 + static_cast<std::size_t>(batch_size));
                std::vector<core::ImageSlice> src(subj.images[core::index_of(s)].begin() + b0,
                                                  subj.images[core::index_of(s)].begin() + b1);
                std::vector<core::TumorMask> masks;
                for (std::size_t k = b0; k < b1; ++k) masks.push_back(data::guidance_mask(subj.labels[k], teacher_mask_mode, rng));
                const torch::Tensor image = model::stack_images(src) * 2 - 1;
                const torch::Tensor tumor = model::mask_network(image, model::stack_masks(masks));
                for (Modality t : core::kAllModalities) {
                    if (t == s) continue;
                    const auto cond = model::one_hot_condition(model::modality_indices(t, image.size(0)));
                    const auto ft = model::teacher_forward(teacher.generator, image, tumor, cond).fused_feature;
                    const auto fs_ = model::student_forward(student.generator, image, cond).feature_tap;
                    acc.add(ft, fs_);
                }
            }
        }
    }
    return acc.result(student.scheme);
}

}  // namespace utad::eval
