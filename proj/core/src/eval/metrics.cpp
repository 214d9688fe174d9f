#include "utad/eval/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "utad/error.hpp"

namespace utad::eval {

namespace {

std::vector<double> gaussian_kernel(int size, double sigma) {
    std::vector<double> k(static_cast<std::size_t>(size));
    const double c = (size - 1) / 2.0;
    double sum = 0;
    for (int i = 0; i < size; ++i) sum += k[i] = std::exp(-(i - c) * (i - c) / (2 * sigma * sigma));
    for (auto& v : k) v /= sum;
    return k;
}

// Valid-mode separable filtering of an h×w field.
std::vector<double> filter_valid(const std::vector<double>& in, int h, int w, const std::vector<double>& k) {
    const int n = static_cast<int>(k.size());
    const int oh = h - n + 1, ow = w - n + 1;
    std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0;
            for (int i = 0; i < n; ++i) s += k[i] * in[static_cast<std::size_t>(y) * w + x + i];
            tmp[static_cast<std::size_t>(y) * ow + x] = s;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0;
            for (int i = 0; i < n; ++i) s += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = s;
        }
    }
    return out;
}

void require_comparable(const core::ImageSlice& a, const core::ImageSlice& b, const char* what) {
    core::require_same_shape(a.height, a.width, b.height, b.width, what);
    if (a.space != b.space) throw ShapeMismatch(std::string(what) + ": images are in different intensity spaces");
    if (a.size() == 0) throw InvalidInput(std::string(what) + ": empty image");
}

}  // namespace

double ssim(const core::ImageSlice& a, const core::ImageSlice& b, const SsimOptions& o) {
    require_comparable(a, b, "ssim");
    if (a.height < o.window || a.width < o.window) {
        throw InvalidInput("ssim: image " + std::to_string(a.height) + "x" + std::to_string(a.width) +
                           " is smaller than the " + std::to_string(o.window) + "-pixel window");
    }
    const double range = core::dynamic_range(a.space);
    const double c1 = (o.k1 * range) * (o.k1 * range), c2 = (o.k2 * range) * (o.k2 * range);
    const std::size_t n = a.size();
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = a.pixels[i];
        y[i] = b.pixels[i];
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    const auto k = gaussian_kernel(o.window, o.sigma);
    const auto mx = filter_valid(x, a.height, a.width, k), my = filter_valid(y, a.height, a.width, k);
    const auto sxx = filter_valid(xx, a.height, a.width, k), syy = filter_valid(yy, a.height, a.width, k);
    const auto sxy = filter_valid(xy, a.height, a.width, k);
    double total = 0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
        const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cov = sxy[i] - mx[i] * my[i];
        total += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) / ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    return total / static_cast<double>(mx.size());
}

double psnr(const core::ImageSlice& a, const core::ImageSlice& b) {
    require_comparable(a, b, "psnr");
    double se = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a.pixels[i]) - b.pixels[i];
        se += d * d;
    }
    const double mse = se / static_cast<double>(a.size());
    if (mse == 0) return kInfinitePsnr;
    const double range = core::dynamic_range(a.space);
    return 10.0 * std::log10(range * range / mse);
}

Rect wt_bounding_box(const core::TumorMask& mask) {
    Rect r{mask.height, -1, mask.width, -1};
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.at(y, x)) continue;
            r.row_min = std::min(r.row_min, y);
            r.row_max = std::max(r.row_max, y);
            r.col_min = std::min(r.col_min, x);
            r.col_max = std::max(r.col_max, x);
        }
    }
    if (r.row_max < 0) throw UndefinedMetric("bounding box of an empty mask");
    return r;
}

Rect expand_rect(const Rect& r, int min_side, int height, int width) {
    auto grow = [](int lo, int hi, int min_side, int extent) {
        const int need = min_side - (hi - lo + 1);
        if (need > 0) {
            lo -= need / 2;
            hi += need - need / 2;
        }
        if (lo < 0) {
            hi -= lo;
            lo = 0;
        }
        if (hi > extent - 1) {
            lo -= hi - (extent - 1);
            hi = extent - 1;
        }
        return std::pair{std::max(lo, 0), hi};
    };
    const auto [r0, r1] = grow(r.row_min, r.row_max, min_side, height);
    const auto [c0, c1] = grow(r.col_min, r.col_max, min_side, width);
    return Rect{r0, r1, c0, c1};
}

core::ImageSlice crop(const core::ImageSlice& s, const Rect& r) {
    if (r.row_min < 0 || r.col_min < 0 || r.row_max >= s.height || r.col_max >= s.width || r.height() < 1 ||
        r.width() < 1) {
        throw InvalidInput("crop: rectangle outside the image");
    }
    core::ImageSlice out(r.height(), r.width(), s.space);
    for (int y = 0; y < r.height(); ++y) {
        for (int x = 0; x < r.width(); ++x) out.at(y, x) = s.at(r.row_min + y, r.col_min + x);
    }
    return out;
}

double local_metric(const core::ImageSlice& a, const core::ImageSlice& b, const core::TumorMask& gt_wt_mask,
                    LocalMetric metric, const SsimOptions& options) {
    require_comparable(a, b, "local metric");
    core::require_same_shape(a.height, a.width, gt_wt_mask.height, gt_wt_mask.width, "local metric mask");
    const Rect box = expand_rect(wt_bounding_box(gt_wt_mask), options.window, a.height, a.width);
    const auto ca = crop(a, box), cb = crop(b, box);
    return metric == LocalMetric::Ssim ? ssim(ca, cb, options) : psnr(ca, cb);
}

BinaryVolume BinaryVolume::from_mask(const core::TumorMask& m) {
    BinaryVolume v(1, m.height, m.width);
    for (std::size_t i = 0; i < m.pixels.size(); ++i) v.voxels[i] = m.pixels[i] ? 1 : 0;
    return v;
}

BinaryVolume BinaryVolume::from_labels(const data::Volume& labels, core::TumorRegion region) {
    BinaryVolume v(labels.depth, labels.height, labels.width);
    core::compose_region(labels.labels(), region, v.voxels);
    return v;
}

std::size_t BinaryVolume::count() const noexcept {
    return static_cast<std::size_t>(std::count_if(voxels.begin(), voxels.end(), [](auto v) { return v != 0; }));
}

namespace {

void require_same_grid(const BinaryVolume& a, const BinaryVolume& b, const char* what) {
    if (a.depth != b.depth || a.height != b.height || a.width != b.width) {
        throw ShapeMismatch(std::string(what) + ": masks differ in shape");
    }
}

// Squared distance transform along one line (lower envelope of parabolas) for
// samples spaced `step` apart. f holds squared distances, INF where unknown.
void edt_line(std::vector<double>& f, double step, std::vector<double>& d, std::vector<int>& v, std::vector<double>& z) {
    const int n = static_cast<int>(f.size());
    const double inf = std::numeric_limits<double>::infinity();
    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (f[q] == inf) continue;
        const double pq = q * step;
        while (k >= 0) {
            const double pv = v[k] * step;
            const double s = ((f[q] + pq * pq) - (f[v[k]] + pv * pv)) / (2 * (pq - pv));
            if (s <= z[k]) {
                --k;
            } else {
                break;
            }
        }
        ++k;
        v[k] = q;
        z[k] = k == 0 ? -inf : ((f[q] + pq * pq) - (f[v[k - 1]] + (v[k - 1] * step) * (v[k - 1] * step))) /
                                   (2 * (pq - v[k - 1] * step));
        z[k + 1] = inf;
    }
    if (k < 0) return;  // no finite sample on this line
    int j = 0;
    for (int q = 0; q < n; ++q) {
        const double pq = q * step;
        while (z[j + 1] < pq) ++j;
        const double diff = pq - v[j] * step;
        d[q] = diff * diff + f[v[j]];
    }
    f.assign(d.begin(), d.end());
}

// Squared Euclidean distance (mm²) from every voxel to the nearest set voxel.
std::vector<double> squared_edt(const BinaryVolume& set, const data::Spacing& sp) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> g(set.voxels.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = set.voxels[i] ? 0.0 : inf;
    const int dims[3] = {set.depth, set.height, set.width};
    const double steps[3] = {sp.z, sp.y, sp.x};
    const std::size_t strides[3] = {static_cast<std::size_t>(set.height) * set.width, static_cast<std::size_t>(set.width), 1};
    for (int axis = 2; axis >= 0; --axis) {
        const int n = dims[axis];
        std::vector<double> f(n), d(n), z(n + 1);
        std::vector<int> v(n);
        for (int z0 = 0; z0 < (axis == 0 ? 1 : set.depth); ++z0) {
            for (int y0 = 0; y0 < (axis == 1 ? 1 : set.height); ++y0) {
                for (int x0 = 0; x0 < (axis == 2 ? 1 : set.width); ++x0) {
                    const std::size_t base = set.index(z0, y0, x0);
                    for (int i = 0; i < n; ++i) f[i] = g[base + i * strides[axis]];
                    d.assign(n, inf);
                    edt_line(f, steps[axis], d, v, z);
                    for (int i = 0; i < n; ++i) g[base + i * strides[axis]] = f[i];
                }
            }
        }
    }
    return g;
}

}  // namespace

double dsc(const BinaryVolume& a, const BinaryVolume& b) {
    require_same_grid(a, b, "dsc");
    std::size_t na = 0, nb = 0, both = 0;
    for (std::size_t i = 0; i < a.voxels.size(); ++i) {
        na += a.voxels[i] != 0;
        nb += b.voxels[i] != 0;
        both += a.voxels[i] != 0 && b.voxels[i] != 0;
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

BinaryVolume boundary(const BinaryVolume& m) {
    BinaryVolume out(m.depth, m.height, m.width);
    auto inside = [&](int z, int y, int x) {
        return z >= 0 && y >= 0 && x >= 0 && z < m.depth && y < m.height && x < m.width && m.at(z, y, x) != 0;
    };
    for (int z = 0; z < m.depth; ++z) {
        for (int y = 0; y < m.height; ++y) {
            for (int x = 0; x < m.width; ++x) {
                if (!m.at(z, y, x)) continue;
                const bool edge = !inside(z - 1, y, x) || !inside(z + 1, y, x) || !inside(z, y - 1, x) ||
                                  !inside(z, y + 1, x) || !inside(z, y, x - 1) || !inside(z, y, x + 1);
                out.voxels[out.index(z, y, x)] = edge ? 1 : 0;
            }
        }
    }
    return out;
}

std::vector<double> directed_surface_distances(const BinaryVolume& from, const BinaryVolume& to,
                                               const data::Spacing& spacing) {
    require_same_grid(from, to, "surface distance");
    if (!(spacing.z > 0 && spacing.y > 0 && spacing.x > 0)) throw InvalidInput("surface distance: spacing must be positive");
    const BinaryVolume bf = boundary(from), bt = boundary(to);
    if (bf.count() == 0 || bt.count() == 0) throw UndefinedMetric("surface distance of an empty mask");
    const auto field = squared_edt(bt, spacing);
    std::vector<double> out;
    for (std::size_t i = 0; i < bf.voxels.size(); ++i) {
        if (bf.voxels[i]) out.push_back(std::sqrt(field[i]));
    }
    return out;
}

double percentile_linear(std::vector<double> values, double p) {
    if (values.empty()) throw UndefinedMetric("percentile of an empty set");
    std::sort(values.begin(), values.end());
    const double pos = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

SurfaceDistances surface_distances(const BinaryVolume& a, const BinaryVolume& b, const data::Spacing& spacing) {
    auto pooled = directed_surface_distances(a, b, spacing);
    const auto back = directed_surface_distances(b, a, spacing);
    pooled.insert(pooled.end(), back.begin(), back.end());
    double sum = 0;
    for (double d : pooled) sum += d;
    return SurfaceDistances{sum / static_cast<double>(pooled.size()), percentile_linear(pooled, 95.0)};
}

namespace {

std::pair<torch::Tensor, torch::Tensor> align_features(const torch::Tensor& teacher, const torch::Tensor& student) {
    auto t = teacher.detach().to(torch::kFloat64);
    auto s = student.detach().to(torch::kFloat64);
    if (t.dim() == 3) t = t.unsqueeze(0);
    if (s.dim() == 3) s = s.unsqueeze(0);
    if (t.dim() != 4 || s.dim() != 4 || t.size(0) != s.size(0)) throw ShapeMismatch("feature error: expected N×C×h×w features");
    if (t.size(1) != s.size(1)) {
        throw InvalidInput("feature error: teacher has " + std::to_string(t.size(1)) + " channels, student " +
                           std::to_string(s.size(1)));
    }
    const auto h = std::min(t.size(2), s.size(2)), w = std::min(t.size(3), s.size(3));
    if (t.size(2) != h || t.size(3) != w) t = torch::adaptive_avg_pool2d(t, {h, w});
    if (s.size(2) != h || s.size(3) != w) s = torch::adaptive_avg_pool2d(s, {h, w});
    return {t, s};
}

}  // namespace

void FeatureErrorAccumulator::add(const torch::Tensor& teacher, const torch::Tensor& student) {
    const auto [t, s] = align_features(teacher, student);
    const auto diff = t - s;
    const auto per_channel = diff.abs().sum({0, 2, 3}).contiguous();
    if (abs_sum_.empty()) abs_sum_.assign(static_cast<std::size_t>(t.size(1)), 0.0);
    if (abs_sum_.size() != static_cast<std::size_t>(t.size(1))) throw InvalidInput("feature error: channel count changed");
    const double* p = per_channel.data_ptr<double>();
    for (std::size_t c = 0; c < abs_sum_.size(); ++c) abs_sum_[c] += p[c];
    sq_sum_ += diff.pow(2).sum().item<double>();
    per_channel_ += t.size(0) * t.size(2) * t.size(3);
}

FeatureErrorResult FeatureErrorAccumulator::result(core::StudentScheme scheme) const {
    if (per_channel_ == 0) throw UndefinedMetric("feature error: no features accumulated");
    FeatureErrorResult r;
    r.scheme = scheme;
    double total = 0;
    for (double s : abs_sum_) {
        r.error_map.push_back(s / static_cast<double>(per_channel_));
        total += s;
    }
    const double n = static_cast<double>(per_channel_) * static_cast<double>(abs_sum_.size());
    r.mae = total / n;
    r.mse = sq_sum_ / n;
    return r;
}

FeatureErrorResult feature_error(const torch::Tensor& teacher, const torch::Tensor& student) {
    FeatureErrorAccumulator acc;
    acc.add(teacher, student);
    return acc.result(core::StudentScheme::A);
}

}  // namespace utad::eval
