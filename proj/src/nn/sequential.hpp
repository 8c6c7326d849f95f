#pragma once

#include <memory>
#include <utility>

#include "nn/layer.hpp"

namespace bsldm::nn {

// Linear chain of layers. Owns its members; add<T>(...) keeps a typed
// reference usable for wiring while the chain handles fwd/bwd plumbing.
class Sequential : public Layer {
public:
    template <typename T, typename... Args>
    T& add(Args&&... args) {
        auto layer = std::make_unique<T>(std::forward<Args>(args)...);
        T& ref = *layer;
        layers_.push_back(std::move(layer));
        return ref;
    }

    Tensor forward(const Tensor& x) override {
        Tensor h = x;
        for (auto& l : layers_) h = l->forward(h);
        return h;
    }

    Tensor backward(const Tensor& gy) override {
        Tensor g = gy;
        for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
        return g;
    }

    void collect_params(std::vector<Param*>& out) override {
        for (auto& l : layers_) l->collect_params(out);
    }

    void init_weights(Rng& rng) override {
        for (auto& l : layers_) l->init_weights(rng);
    }

    std::size_t depth() const { return layers_.size(); }

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace bsldm::nn
