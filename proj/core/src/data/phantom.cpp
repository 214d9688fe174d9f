#include "utad/data/phantom.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "utad/core/region.hpp"
#include "utad/core/rng.hpp"
#include "utad/data/manifest.hpp"
#include "utad/error.hpp"

namespace utad::data {

namespace {

using core::Modality;

enum Tissue { kBackground, kCsf, kGrey, kWhite, kNecrotic, kEnhancing, kEdema, kTissueCount };

// Rows follow the canonical modality order (Flair, T1, T1ce, T2).
constexpr double kIntensity[core::kNumModalities][kTissueCount] = {
    //  bg    CSF   grey  white  NCR   ET    ED
    {0.0, 0.10, 0.45, 0.33, 0.60, 0.78, 0.95},  // Flair: edema brightest, CSF suppressed
    {0.0, 0.12, 0.48, 0.78, 0.25, 0.60, 0.36},  // T1: white matter bright
    {0.0, 0.30, 0.40, 0.62, 0.18, 0.98, 0.50},  // T1ce: enhancing rim brightest
    {0.0, 0.95, 0.62, 0.38, 0.78, 0.55, 0.86},  // T2: fluid and tumor bright
};

// Smooth modality-specific gain (coil-like shading) over normalized brain coordinates.
double modality_gain(Modality m, double nz, double ny, double nx) {
    const double r2 = nz * nz + ny * ny + nx * nx;
    switch (m) {
        case Modality::Flair: return 1.0 + 0.04 * r2;
        case Modality::T1: return 1.0 + 0.05 * ny;
        case Modality::T1ce: return 1.0 - 0.04 * r2;
        case Modality::T2: return 1.0 - 0.04 * nx;
    }
    return 1.0;
}

struct Anatomy {
    double cz, cy, cx;     // brain centre
    double az, ay, ax;     // brain semi-axes
    int folds;             // grey/white boundary folding frequency
    double fold_phase;
    double tz, ty, tx;     // tumor centre
    double rz, ry, rx;     // edema semi-axes
    int lobes;
    double lobe_phase;
    std::array<double, 3> tex_amp, tex_freq, tex_phase;
    std::array<std::array<double, 3>, 3> tex_dir;
};

Anatomy draw_anatomy(const PhantomOptions& o, core::Rng& rng) {
    Anatomy a{};
    const double d = o.depth, h = o.height, w = o.width;
    a.cz = (d - 1) / 2.0 + rng.uniform(-0.5, 0.5);
    a.cy = (h - 1) / 2.0 + rng.uniform(-0.03, 0.03) * h;
    a.cx = (w - 1) / 2.0 + rng.uniform(-0.03, 0.03) * w;
    a.az = 0.5 * d * rng.uniform(0.9, 1.05);
    a.ay = 0.42 * h * rng.uniform(0.9, 1.04);
    a.ax = 0.34 * w * rng.uniform(0.9, 1.04);
    a.folds = 5 + static_cast<int>(rng.below(3));
    a.fold_phase = rng.uniform(0.0, 2 * std::numbers::pi);

    const double side = rng.bernoulli(0.5) ? 1.0 : -1.0;
    a.tx = a.cx + side * rng.uniform(0.25, 0.45) * a.ax;
    a.ty = a.cy + rng.uniform(-0.35, 0.35) * a.ay;
    a.tz = a.cz + rng.uniform(-0.12, 0.12) * a.az;
    const double r = rng.uniform(0.38, 0.52);
    a.rx = r * a.ax;
    a.ry = r * a.ax * rng.uniform(0.9, 1.2);
    a.rz = rng.uniform(0.35, 0.5) * a.az;
    a.lobes = 2 + static_cast<int>(rng.below(3));
    a.lobe_phase = rng.uniform(0.0, 2 * std::numbers::pi);

    for (int k = 0; k < 3; ++k) {
        a.tex_amp[k] = rng.uniform(0.015, 0.03);
        a.tex_freq[k] = rng.uniform(0.25, 0.6);
        a.tex_phase[k] = rng.uniform(0.0, 2 * std::numbers::pi);
        std::array<double, 3> dir{rng.normal() * 0.3, rng.normal(), rng.normal()};
        const double n = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]) + 1e-12;
        for (auto& c : dir) c /= n;
        a.tex_dir[k] = dir;
    }
    return a;
}

Tissue tissue_at(const Anatomy& a, int z, int y, int x) {
    const double nz = (z - a.cz) / a.az, ny = (y - a.cy) / a.ay, nx = (x - a.cx) / a.ax;
    const double rb = std::sqrt(nz * nz + ny * ny + nx * nx);
    if (rb >= 1.0) return kBackground;

    const double tz = (z - a.tz) / a.rz, ty = (y - a.ty) / a.ry, tx = (x - a.tx) / a.rx;
    const double rt = std::sqrt(tz * tz + ty * ty + tx * tx);
    const double lobe = 1.0 + 0.12 * std::sin(a.lobes * std::atan2(ty, tx) + a.lobe_phase);
    if (rb < 0.95) {
        if (rt < 0.35 * lobe) return kNecrotic;
        if (rt < 0.62 * lobe) return kEnhancing;
        if (rt < 1.0 * lobe) return kEdema;
    }

    if (rb > 0.93) return kCsf;
    for (double side : {-1.0, 1.0}) {
        const double vz = nz / 0.45, vy = (ny + 0.08) / 0.28, vx = (nx - side * 0.2) / 0.1;
        if (vz * vz + vy * vy + vx * vx < 1.0) return kCsf;
    }
    const double theta = std::atan2(ny, nx);
    const double boundary = 0.62 + 0.07 * std::sin(a.folds * theta + a.fold_phase);
    return rb < boundary ? kWhite : kGrey;
}

float label_of(Tissue t) {
    switch (t) {
        case kNecrotic: return core::label::kNcrNet;
        case kEnhancing: return core::label::kEnhancing;
        case kEdema: return core::label::kEdema;
        default: return core::label::kBackground;
    }
}

}  // namespace

std::string phantom_subject_id(int index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "Phantom_%03d", index + 1);
    return buf;
}

PhantomSubject make_phantom_subject(const PhantomOptions& o, int index) {
    if (o.depth < 1 || o.height < 1 || o.width < 1) throw InvalidInput("phantom: dimensions must be positive");
    core::Rng rng = core::Rng::derive(o.seed, static_cast<std::uint64_t>(index));
    const Anatomy a = draw_anatomy(o, rng);

    PhantomSubject s;
    s.subject_id = phantom_subject_id(index);
    s.labels = Volume(o.depth, o.height, o.width, o.spacing);
    s.labels.subject_id = s.subject_id;
    for (Modality m : core::kAllModalities) {
        Volume& v = s.modalities[core::index_of(m)];
        v = Volume(o.depth, o.height, o.width, o.spacing);
        v.subject_id = s.subject_id;
        v.modality = m;
    }

    std::array<core::Rng, core::kNumModalities> noise = {
        core::Rng::derive(o.seed ^ 0x5eed, static_cast<std::uint64_t>(index) * 4 + 0),
        core::Rng::derive(o.seed ^ 0x5eed, static_cast<std::uint64_t>(index) * 4 + 1),
        core::Rng::derive(o.seed ^ 0x5eed, static_cast<std::uint64_t>(index) * 4 + 2),
        core::Rng::derive(o.seed ^ 0x5eed, static_cast<std::uint64_t>(index) * 4 + 3)};

    for (int z = 0; z < o.depth; ++z) {
        for (int y = 0; y < o.height; ++y) {
            for (int x = 0; x < o.width; ++x) {
                const Tissue t = tissue_at(a, z, y, x);
                s.labels.at(z, y, x) = label_of(t);
                if (t == kBackground) continue;
                double tex = 0.0;
                for (int k = 0; k < 3; ++k) {
                    const auto& d = a.tex_dir[k];
                    tex += a.tex_amp[k] * std::sin(a.tex_freq[k] * (d[0] * z * 2.0 + d[1] * y + d[2] * x) + a.tex_phase[k]);
                }
                const double nz = (z - a.cz) / a.az, ny = (y - a.cy) / a.ay, nx = (x - a.cx) / a.ax;
                for (Modality m : core::kAllModalities) {
                    const std::size_t mi = core::index_of(m);
                    double v = kIntensity[mi][t] * (1.0 + tex) * modality_gain(m, nz, ny, nx);
                    v += o.noise * noise[mi].normal();
                    s.modalities[mi].at(z, y, x) = static_cast<float>(1000.0 * std::max(v, 1e-3));
                }
            }
        }
    }
    return s;
}

std::vector<std::string> generate_phantom(const PhantomOptions& options, const std::filesystem::path& root) {
    if (options.subjects < 1) throw InvalidInput("phantom: need at least one subject");
    std::error_code ec;
    std::filesystem::create_directories(root, ec);
    if (ec || !std::filesystem::is_directory(root)) throw Error(root.string() + ": cannot create output directory");

    std::vector<std::string> ids;
    for (int i = 0; i < options.subjects; ++i) {
        const PhantomSubject s = make_phantom_subject(options, i);
        const auto dir = root / s.subject_id;
        std::filesystem::create_directories(dir, ec);
        if (ec) throw Error(dir.string() + ": cannot create subject directory");
        for (Modality m : core::kAllModalities) {
            save_volume(volume_path(root, s.subject_id, m), s.modalities[core::index_of(m)]);
        }
        save_volume(label_path(root, s.subject_id), s.labels, VoxelType::UInt8);
        ids.push_back(s.subject_id);
    }
    return ids;
}

}  // namespace utad::data
