#pragma once

#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace bsldm {

// Single-channel image held as doubles. Pixel range conventions:
//   - storage domain [0, 1]  (what PNG files round-trip through)
//   - model domain  [-1, 1]  (what networks and metrics-preprocessing see)
struct Image {
    int h = 0;
    int w = 0;
    std::vector<real> px;

    Image() = default;
    Image(int h_, int w_) : h(h_), w(w_), px(static_cast<std::size_t>(h_) * w_, 0.0) {}

    real& at(int y, int x) { return px[static_cast<std::size_t>(y) * w + x]; }
    real at(int y, int x) const { return px[static_cast<std::size_t>(y) * w + x]; }
    std::size_t size() const { return px.size(); }

    real mean() const;
    real min() const;
    real max() const;
};

// 8/16-bit grayscale PNG -> [0,1]. Rejects color inputs.
Image load_png_gray(const std::string& path);

// [0,1] image (clamped) -> 16-bit grayscale PNG.
void save_png_gray16(const Image& img, const std::string& path);

inline Image to_unit(const Image& model_domain) {  // [-1,1] -> [0,1]
    Image out(model_domain.h, model_domain.w);
    for (std::size_t i = 0; i < out.px.size(); ++i)
        out.px[i] = (model_domain.px[i] + 1.0) * 0.5;
    return out;
}

inline Image to_model(const Image& unit_domain) {  // [0,1] -> [-1,1]
    Image out(unit_domain.h, unit_domain.w);
    for (std::size_t i = 0; i < out.px.size(); ++i)
        out.px[i] = unit_domain.px[i] * 2.0 - 1.0;
    return out;
}

// Image <-> single-sample NCHW tensor (1 x 1 x H x W).
Tensor image_to_tensor(const Image& img);
Image tensor_to_image(const Tensor& t);

}  // namespace bsldm
