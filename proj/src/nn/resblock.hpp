#pragma once

#include <memory>
#include <optional>

#include "nn/activations.hpp"
#include "nn/conv2d.hpp"
#include "nn/linear.hpp"
#include "nn/norm.hpp"

namespace bsldm::nn {

// Residual block: norm -> silu -> conv, optional per-channel timestep
// embedding injection, norm -> silu -> conv, plus a 1x1 skip projection when
// the channel count changes.
class ResBlock {
public:
    ResBlock(std::string name, int in_ch, int out_ch, int temb_dim, int norm_groups);

    void init_weights(Rng& rng);

    // temb may be empty when the block is used without time conditioning.
    Tensor forward(const Tensor& x, const Tensor& temb);
    // Returns grad w.r.t. x; accumulates grad w.r.t. temb into gtemb (same
    // shape as temb) when time conditioning is active.
    Tensor backward(const Tensor& gy, Tensor* gtemb);
    void collect_params(std::vector<Param*>& out);

private:
    int in_ch_, out_ch_, temb_dim_;
    GroupNorm norm1_;
    Silu act1_;
    Conv2d conv1_;
    std::optional<Linear> temb_proj_;
    Silu temb_act_;
    GroupNorm norm2_;
    Silu act2_;
    Conv2d conv2_;
    std::optional<Conv2d> skip_;
    std::vector<int> h_shape_;
};

// Layer-interface adapter for time-free residual blocks, so plain chains
// (encoder/decoder stacks) can hold them in a Sequential.
class ResBlockLayer : public Layer {
public:
    ResBlockLayer(std::string name, int in_ch, int out_ch, int norm_groups)
        : blk_(std::move(name), in_ch, out_ch, 0, norm_groups) {}
    Tensor forward(const Tensor& x) override { return blk_.forward(x, empty_); }
    Tensor backward(const Tensor& gy) override { return blk_.backward(gy, nullptr); }
    void collect_params(std::vector<Param*>& out) override { blk_.collect_params(out); }
    void init_weights(Rng& rng) override { blk_.init_weights(rng); }

private:
    ResBlock blk_;
    Tensor empty_;
};

}  // namespace bsldm::nn
