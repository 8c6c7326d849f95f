#pragma once

#include "nn/layer.hpp"

namespace bsldm::nn {

// Nearest-neighbor 2x upsampling; paired with a following conv it avoids the
// checkerboard artifacts of transposed convolutions.
class Upsample2x : public Layer {
public:
    Tensor forward(const Tensor& x) override {
        in_shape_ = x.shape();
        const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
        Tensor y({n, c, h * 2, w * 2});
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < c; ++j)
                for (int yy = 0; yy < h; ++yy)
                    for (int xx = 0; xx < w; ++xx) {
                        real v = x.at(i, j, yy, xx);
                        y.at(i, j, 2 * yy, 2 * xx) = v;
                        y.at(i, j, 2 * yy, 2 * xx + 1) = v;
                        y.at(i, j, 2 * yy + 1, 2 * xx) = v;
                        y.at(i, j, 2 * yy + 1, 2 * xx + 1) = v;
                    }
        return y;
    }
    Tensor backward(const Tensor& gy) override {
        Tensor gx(in_shape_);
        const int n = gx.dim(0), c = gx.dim(1), h = gx.dim(2), w = gx.dim(3);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < c; ++j)
                for (int yy = 0; yy < h; ++yy)
                    for (int xx = 0; xx < w; ++xx)
                        gx.at(i, j, yy, xx) =
                            gy.at(i, j, 2 * yy, 2 * xx) + gy.at(i, j, 2 * yy, 2 * xx + 1) +
                            gy.at(i, j, 2 * yy + 1, 2 * xx) + gy.at(i, j, 2 * yy + 1, 2 * xx + 1);
        return gx;
    }

private:
    std::vector<int> in_shape_;
};

}  // namespace bsldm::nn
