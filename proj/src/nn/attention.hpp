#pragma once

#include <memory>

#include "nn/conv2d.hpp"
#include "nn/norm.hpp"

namespace bsldm::nn {

// Single-head self-attention over spatial positions with a residual
// connection: x + proj(attn(norm(x))). q/k/v/proj are 1x1 convolutions.
class SelfAttention2d : public Layer {
public:
    SelfAttention2d(std::string name, int channels, int norm_groups);

    void init_weights(Rng& rng);

    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& gy) override;
    void collect_params(std::vector<Param*>& out) override;

private:
    int channels_;
    GroupNorm norm_;
    Conv2d q_, k_, v_, proj_;
    Tensor qv_, kv_, vv_;      // cached projections (N, C, H, W)
    aligned_vector<real> probs_;  // cached softmax rows, N x M x M
};

}  // namespace bsldm::nn
