#include <algorithm>
#include <cmath>
#include <numbers>

#include "utad/data/sample.hpp"
#include "utad/error.hpp"

namespace utad::data {

AugmentParams draw_augment_params(core::Rng& rng) {
    AugmentParams p;
    p.flip = rng.bernoulli(0.5);
    p.angle_degrees = rng.uniform(-10.0, 10.0);
    return p;
}

namespace {

// Samples `src` at (y, x) with bilinear weights; outside the grid contributes 0.
template <class Get>
double sample_bilinear(Get&& get, int h, int w, double y, double x) {
    const int y0 = static_cast<int>(std::floor(y));
    const int x0 = static_cast<int>(std::floor(x));
    const double wy = y - y0;
    const double wx = x - x0;
    double acc = 0.0;
    for (int dy = 0; dy <= 1; ++dy) {
        for (int dx = 0; dx <= 1; ++dx) {
            const int yy = y0 + dy;
            const int xx = x0 + dx;
            if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
            const double weight = (dy ? wy : 1 - wy) * (dx ? wx : 1 - wx);
            if (weight != 0.0) acc += weight * get(yy, xx);
        }
    }
    return acc;
}

}  // namespace

Sample apply_augment(const Sample& sample, const AugmentParams& params) {
    const auto& img = sample.image;
    const auto& mask = sample.mask;
    core::require_same_shape(img.height, img.width, mask.height, mask.width, "augment");
    if (params.identity()) return sample;

    const int h = img.height;
    const int w = img.width;
    Sample out = sample;
    const double cy = (h - 1) / 2.0;
    const double cx = (w - 1) / 2.0;
    const double theta = params.angle_degrees * std::numbers::pi / 180.0;
    const double c = std::cos(theta);
    const double s = std::sin(theta);

    for (int r = 0; r < h; ++r) {
        for (int col = 0; col < w; ++col) {
            // Output pixel → source coordinate: undo the rotation, then the flip.
            const double dy = r - cy;
            const double dx = col - cx;
            const double sy = c * dy + s * dx + cy;
            double sx = -s * dy + c * dx + cx;
            if (params.flip) sx = (w - 1) - sx;
            const std::size_t i = static_cast<std::size_t>(r) * w + col;
            if (params.angle_degrees == 0.0) {
                const int src_col = static_cast<int>(std::lround(sx));
                out.image.pixels[i] = img.at(r, src_col);
                out.mask.pixels[i] = mask.at(r, src_col);
                continue;
            }
            const double v = sample_bilinear([&](int y, int x) { return static_cast<double>(img.at(y, x)); }, h, w, sy, sx);
            const double m = sample_bilinear([&](int y, int x) { return static_cast<double>(mask.at(y, x)); }, h, w, sy, sx);
            out.image.pixels[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
            out.mask.pixels[i] = m >= 0.5 ? 1 : 0;
        }
    }
    return out;
}

}  // namespace utad::data
