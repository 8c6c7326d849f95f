#pragma once

#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace bsldm {

// Per-timestep variance schedule for the forward/reverse diffusion process.
// Timesteps are zero-indexed 0..T-1. alpha_bar[t] is the cumulative product
// of alpha up to and including t; alpha_bar[-1] is implicitly 1, which makes
// sigma[0] = 0 (no noise injected at the final reverse step).
struct NoiseSchedule {
    int T = 0;
    std::vector<real> beta;
    std::vector<real> alpha;
    std::vector<real> alpha_bar;
    std::vector<real> sigma;  // posterior std dev, sigma^2 = (1-abar_{t-1})/(1-abar_t) * beta_t
};

// Cosine alpha_bar profile with each derived beta_t clipped into
// [beta_min, beta_max], then alpha_bar recomputed cumulatively. The clip
// honors the stated beta range while keeping the cosine shape in between.
NoiseSchedule make_cosine_schedule(int T, real beta_min, real beta_max);

struct OffsetNoiseConfig {
    real lambda = 0.1;  // weight of the broadcast bias term; 0 reduces to i.i.d. Gaussian
};

// Offset noise over an NCHW shape: eps = eps_g + sqrt(lambda) * eta, where
// eps_g is i.i.d. standard Gaussian and eta is one standard Gaussian scalar
// per (sample, channel) broadcast across all spatial positions. The marginal
// distribution is N(0, I + lambda * ones).
Tensor sample_offset_noise(const std::vector<int>& shape, real lambda, Rng& rng);
Tensor sample_offset_noise(const std::vector<int>& shape, real lambda, std::uint64_t seed);

// z_t = sqrt(abar_t) * z0 + sqrt(1 - abar_t) * noise, elementwise.
Tensor forward_noise(const Tensor& z0, int t, const NoiseSchedule& schedule,
                     const Tensor& noise);
// Batched variant with one timestep per sample.
Tensor forward_noise(const Tensor& z0, const std::vector<int>& t,
                     const NoiseSchedule& schedule, const Tensor& noise);

}  // namespace bsldm
