#pragma once

#include <cmath>

#include "nn/layer.hpp"

namespace bsldm::nn {

class Silu : public Layer {
public:
    Tensor forward(const Tensor& x) override {
        x_ = x;
        Tensor y = Tensor::zeros_like(x);
        for (std::size_t i = 0; i < x.size(); ++i) {
            real s = 1.0 / (1.0 + std::exp(-x[i]));
            y[i] = x[i] * s;
        }
        return y;
    }
    Tensor backward(const Tensor& gy) override {
        Tensor gx = Tensor::zeros_like(gy);
        for (std::size_t i = 0; i < gy.size(); ++i) {
            real s = 1.0 / (1.0 + std::exp(-x_[i]));
            gx[i] = gy[i] * s * (1.0 + x_[i] * (1.0 - s));
        }
        return gx;
    }

private:
    Tensor x_;
};

class LeakyRelu : public Layer {
public:
    explicit LeakyRelu(real slope = 0.2) : slope_(slope) {}
    Tensor forward(const Tensor& x) override {
        x_ = x;
        Tensor y = Tensor::zeros_like(x);
        for (std::size_t i = 0; i < x.size(); ++i)
            y[i] = x[i] > 0.0 ? x[i] : slope_ * x[i];
        return y;
    }
    Tensor backward(const Tensor& gy) override {
        Tensor gx = Tensor::zeros_like(gy);
        for (std::size_t i = 0; i < gy.size(); ++i)
            gx[i] = gy[i] * (x_[i] > 0.0 ? 1.0 : slope_);
        return gx;
    }

private:
    real slope_;
    Tensor x_;
};

class TanhLayer : public Layer {
public:
    Tensor forward(const Tensor& x) override {
        y_ = Tensor::zeros_like(x);
        for (std::size_t i = 0; i < x.size(); ++i) y_[i] = std::tanh(x[i]);
        return y_;
    }
    Tensor backward(const Tensor& gy) override {
        Tensor gx = Tensor::zeros_like(gy);
        for (std::size_t i = 0; i < gy.size(); ++i)
            gx[i] = gy[i] * (1.0 - y_[i] * y_[i]);
        return gx;
    }

private:
    Tensor y_;
};

inline real sigmoid(real x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace bsldm::nn
