#pragma once

#include "nn/layer.hpp"

namespace bsldm::nn {

// Exponential moving average over a parameter set:
//   shadow <- decay * shadow + (1 - decay) * param
// Shadow tensors are public for checkpointing.
class Ema {
public:
    Ema(real decay, const std::vector<Param*>& params) : decay_(decay) {
        shadow.reserve(params.size());
        for (const Param* p : params) shadow.push_back(p->value);
    }

    void update(const std::vector<Param*>& params) {
        require(params.size() == shadow.size(), Status::InvalidArgument, "ema param count changed");
        for (std::size_t i = 0; i < params.size(); ++i) {
            Tensor& s = shadow[i];
            const Tensor& w = params[i]->value;
            for (std::size_t k = 0; k < s.size(); ++k)
                s[k] = decay_ * s[k] + (1.0 - decay_) * w[k];
        }
    }

    // Overwrites live weights with the averaged ones (used for sampling).
    void copy_to(const std::vector<Param*>& params) const {
        require(params.size() == shadow.size(), Status::InvalidArgument, "ema param count changed");
        for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = shadow[i];
    }

    real decay() const { return decay_; }

    std::vector<Tensor> shadow;

private:
    real decay_;
};

}  // namespace bsldm::nn
