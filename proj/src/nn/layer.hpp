#pragma once

#include <string>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace bsldm::nn {

struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    explicit Param(std::string n, std::vector<int> shape)
        : name(std::move(n)), value(shape), grad(std::move(shape)) {}
};

// Base for chainable layers. forward() caches whatever backward() needs;
// backward() returns the gradient w.r.t. the input and accumulates parameter
// gradients. Layers are single-use per step: forward then backward.
class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x) = 0;
    virtual Tensor backward(const Tensor& gy) = 0;
    virtual void collect_params(std::vector<Param*>& out) { (void)out; }
    virtual void init_weights(Rng& rng) { (void)rng; }
};

inline std::size_t param_count(const std::vector<Param*>& params) {
    std::size_t n = 0;
    for (const Param* p : params) n += p->value.size();
    return n;
}

inline void zero_grads(const std::vector<Param*>& params) {
    for (Param* p : params) p->grad.fill(0.0);
}

}  // namespace bsldm::nn
