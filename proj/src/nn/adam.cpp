#include "nn/adam.hpp"

#include <cmath>

namespace bsldm::nn {

Adam::Adam(AdamConfig cfg, std::vector<Param*> params)
    : cfg_(cfg), params_(std::move(params)) {
    m.reserve(params_.size());
    v.reserve(params_.size());
    for (Param* p : params_) {
        m.push_back(Tensor::zeros_like(p->value));
        v.push_back(Tensor::zeros_like(p->value));
    }
}

void Adam::step() {
    ++t;
    const real bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<real>(t));
    const real bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<real>(t));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& w = params_[i]->value;
        const Tensor& g = params_[i]->grad;
        Tensor& mi = m[i];
        Tensor& vi = v[i];
        if (cfg_.weight_decay > 0.0) w.scale_(1.0 - cfg_.lr * cfg_.weight_decay);
        for (std::size_t k = 0; k < w.size(); ++k) {
            mi[k] = cfg_.beta1 * mi[k] + (1.0 - cfg_.beta1) * g[k];
            vi[k] = cfg_.beta2 * vi[k] + (1.0 - cfg_.beta2) * g[k] * g[k];
            real mhat = mi[k] / bc1;
            real vhat = vi[k] / bc2;
            w[k] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

}  // namespace bsldm::nn
