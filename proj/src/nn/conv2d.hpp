#pragma once

#include "core/rng.hpp"
#include "nn/layer.hpp"

namespace bsldm::nn {

// 3x3/1x1 convolution over NCHW batches, im2col + GEMM. The column buffer is
// rebuilt during backward from the cached input instead of being cached, which
// keeps per-layer memory at one input tensor.
class Conv2d : public Layer {
public:
    Conv2d(std::string name, int in_ch, int out_ch, int kernel, int stride, int pad);

    void init_weights(Rng& rng);  // He-normal fan-in init

    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& gy) override;
    void collect_params(std::vector<Param*>& out) override;

    int in_channels() const { return in_ch_; }
    int out_channels() const { return out_ch_; }

    Param weight;  // (out, in, k, k)
    Param bias;    // (out)

private:
    int in_ch_, out_ch_, kernel_, stride_, pad_;
    Tensor x_;            // cached input
    aligned_vector<real> col_;  // scratch K x M column buffer

    void im2col(const real* src, int h, int w, int oh, int ow);
};

}  // namespace bsldm::nn
