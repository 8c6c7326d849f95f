#pragma once

#include <cstdint>

#include "nn/layer.hpp"

namespace bsldm::nn {

struct AdamConfig {
    real lr = 1e-4;
    real beta1 = 0.9;
    real beta2 = 0.999;
    real eps = 1e-8;
    real weight_decay = 0.0;  // decoupled (AdamW) when > 0
};

// Adam with optional decoupled weight decay. Moment buffers and the step
// counter are public so checkpoints can save/restore them for exact resume.
class Adam {
public:
    Adam(AdamConfig cfg, std::vector<Param*> params);

    void step();
    void set_lr(real lr) { cfg_.lr = lr; }
    real lr() const { return cfg_.lr; }
    const std::vector<Param*>& params() const { return params_; }

    std::vector<Tensor> m, v;  // first/second moments, parallel to params
    std::int64_t t = 0;        // completed update steps

private:
    AdamConfig cfg_;
    std::vector<Param*> params_;
};

}  // namespace bsldm::nn
