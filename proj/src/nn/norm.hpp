#pragma once

#include "nn/layer.hpp"

namespace bsldm::nn {

// GroupNorm with affine scale/shift. groups must divide channels.
class GroupNorm : public Layer {
public:
    GroupNorm(std::string name, int channels, int groups, real eps = 1e-6);

    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& gy) override;
    void collect_params(std::vector<Param*>& out) override;

    Param gamma;  // (channels)
    Param beta;   // (channels)

private:
    int channels_, groups_;
    real eps_;
    Tensor xhat_;               // cached normalized input
    std::vector<real> istd_;    // per (n, group) inverse std
};

}  // namespace bsldm::nn
