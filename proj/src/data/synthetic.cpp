#include "data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace bsldm::data {

namespace {

Image blank(int size) {
    Image img;
    img.h = size;
    img.w = size;
    img.px.assign(static_cast<size_t>(size) * size, 0.0);
    return img;
}

void add_blob(Image& img, real cx, real cy, real sigma, real amp) {
    const real inv = 1.0 / (2.0 * sigma * sigma);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            const real dx = x - cx, dy = y - cy;
            img.px[static_cast<size_t>(y) * img.w + x] += amp * std::exp(-(dx * dx + dy * dy) * inv);
        }
}

// Rib-like band: Gaussian profile around a tilted centerline.
void add_band(Image& img, real y0, real theta, real sigma, real amp) {
    const real nx = -std::sin(theta), ny = std::cos(theta);
    const real cx = img.w / 2.0;
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            const real d = (x - cx) * nx + (y - y0) * ny;
            img.px[static_cast<size_t>(y) * img.w + x] += amp * std::exp(-(d / sigma) * (d / sigma));
        }
}

}  // namespace

std::vector<SyntheticPair> generate_synthetic_pairs(int n, const SyntheticConfig& cfg,
                                                    std::uint64_t seed) {
    require(n >= 1, Status::InvalidArgument, "generate_synthetic_pairs: n must be >= 1");
    require(cfg.size >= 8, Status::InvalidArgument, "generate_synthetic_pairs: size too small");
    require(cfg.bone_amplitude >= 0.0, Status::InvalidArgument,
            "generate_synthetic_pairs: negative bone amplitude");

    const int size = cfg.size;
    std::vector<SyntheticPair> pairs;
    pairs.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
        SyntheticPair p;
        char name[32];
        std::snprintf(name, sizeof(name), "syn_%04d", i);
        p.id = name;

        p.soft = blank(size);
        const real base = rng.uniform(0.2, 0.7);
        for (auto& v : p.soft.px) v = base;
        const int blobs = 4 + static_cast<int>(rng.uniform_int(5));
        for (int b = 0; b < blobs; ++b)
            add_blob(p.soft, rng.uniform(0.0, size - 1.0), rng.uniform(0.0, size - 1.0),
                     rng.uniform(0.15, 0.35) * size, rng.uniform(-0.15, 0.25));
        for (auto& v : p.soft.px) v = std::clamp(v, 0.02, 0.98);

        p.bone = blank(size);
        if (cfg.bone_amplitude > 0.0) {
            const int bands = 4 + static_cast<int>(rng.uniform_int(3));
            for (int b = 0; b < bands; ++b) {
                const real y0 = (b + 0.5 + rng.uniform(-0.25, 0.25)) * size /
                                static_cast<real>(bands);
                add_band(p.bone, y0, rng.uniform(-0.3, 0.3), rng.uniform(0.04, 0.08) * size,
                         cfg.bone_amplitude * rng.uniform(0.2, 0.4));
            }
        }

        p.cxr = blank(size);
        for (size_t k = 0; k < p.cxr.px.size(); ++k)
            p.cxr.px[k] = std::clamp(p.soft.px[k] + p.bone.px[k], 0.0, 1.0);
        pairs.push_back(std::move(p));
    }
    return pairs;
}

}  // namespace bsldm::data
