#pragma once

#include "core/rng.hpp"
#include "nn/layer.hpp"

namespace bsldm::nn {

// Fully connected layer over (N, in) batches.
class Linear : public Layer {
public:
    Linear(std::string name, int in_dim, int out_dim);

    void init_weights(Rng& rng);

    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& gy) override;
    void collect_params(std::vector<Param*>& out) override;

    Param weight;  // (out, in)
    Param bias;    // (out)

private:
    int in_dim_, out_dim_;
    Tensor x_;
};

}  // namespace bsldm::nn
