#pragma once

#include <vector>

#include "nn/layer.hpp"

namespace bsldm::vq {

using nn::Param;

// Learnable codebook Z: K code vectors of dimensionality d. Wrapped in a
// Param so it joins the generator optimizer like any other weight.
struct Codebook {
    Param codes;  // (K, d)

    Codebook(int K, int d) : codes("codebook.codes", {K, d}) {
        require(K >= 2, Status::InvalidArgument, "codebook needs K >= 2");
        require(d >= 1, Status::InvalidArgument, "codebook needs d >= 1");
    }

    int K() const { return codes.value.dim(0); }
    int d() const { return codes.value.dim(1); }

    void init_weights(Rng& rng) {
        // Latents are tanh-bounded, so seed the codes across that range.
        for (std::size_t i = 0; i < codes.value.size(); ++i)
            codes.value[i] = rng.uniform(-0.8, 0.8);
    }
};

struct QuantizeResult {
    Tensor z_q;                // nearest codes scattered back to latent layout
    std::vector<int> indices;  // chosen code per site, row-major over (n, h, w)
    // The two squared-distance terms of the quantization loss, as means over
    // latent elements. They are numerically equal; they differ only in which
    // side receives gradient (codebook vs encoder).
    real codebook_term = 0.0;
    real commit_term = 0.0;
};

// Nearest-code lookup per spatial site under Euclidean distance, ties
// resolved to the lowest code index. Latent channel count must equal d.
QuantizeResult quantize(const Tensor& z, const Codebook& cb);

// Gradient wiring around the quantizer. g_zq is the upstream gradient at z_q.
//   gz      = g_zq (straight-through) + commit_scale * 2(z - z_q)/numel
//   gcodes += codebook_scale * 2(z_q - z)/numel, scattered per chosen index
void accumulate_quantize_grads(const Tensor& z, const QuantizeResult& q, const Tensor& g_zq,
                               real codebook_scale, real commit_scale, Tensor& gz,
                               Tensor& gcodes);

}  // namespace bsldm::vq
