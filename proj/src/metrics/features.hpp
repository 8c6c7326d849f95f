#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nn/activations.hpp"
#include "nn/conv2d.hpp"

namespace bsldm::metrics {

// Fixed-weight feature backbone shared by the perceptual loss and LPIPS.
// Implementations are frozen: gradients flow through them to the input but
// their weights are never updated. Single-use semantics: grad_input refers to
// the most recent features() call.
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual std::string label() const = 0;
    virtual std::vector<Tensor> features(const Tensor& x) = 0;
    virtual Tensor grad_input(const std::vector<Tensor>& gfeats) = 0;
};

// Features = the image itself. Reduces the perceptual distance to plain MSE,
// which is what the metric oracle tests pin down.
class IdentityExtractor final : public FeatureExtractor {
public:
    std::string label() const override { return "identity"; }
    std::vector<Tensor> features(const Tensor& x) override { return {x}; }
    Tensor grad_input(const std::vector<Tensor>& gfeats) override { return gfeats.at(0); }
};

// Three stride-2 conv stages with fixed He-initialized weights drawn from a
// named seed. An offline stand-in for a pretrained backbone: the extractor is
// deterministic, multi-scale, and frozen, which is all the loss plumbing
// relies on. The label travels in checkpoints and reports.
class SeededConvExtractor final : public FeatureExtractor {
public:
    explicit SeededConvExtractor(std::uint64_t seed = 0x5eed0001);
    std::string label() const override { return "seeded-random-v1"; }
    std::vector<Tensor> features(const Tensor& x) override;
    Tensor grad_input(const std::vector<Tensor>& gfeats) override;

private:
    nn::Conv2d c1_, c2_, c3_;
    nn::LeakyRelu a1_, a2_, a3_;
};

// Mean squared feature difference: per layer the mean over all elements,
// averaged across layers. With the identity extractor this equals MSE.
real feature_distance(FeatureExtractor& fe, const Tensor& a, const Tensor& b);

// Same value; additionally writes d(distance)/da into ga.
real feature_distance_grad(FeatureExtractor& fe, const Tensor& a, const Tensor& b, Tensor& ga);

}  // namespace bsldm::metrics
