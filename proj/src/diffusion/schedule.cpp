#include "diffusion/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"

namespace bsldm {

namespace {

// Cosine profile f(u) = cos^2((u + s) / (1 + s) * pi/2), s = 0.008.
real cosine_f(real u) {
    constexpr real s = 0.008;
    real a = (u + s) / (1.0 + s) * 1.5707963267948966;
    real c = std::cos(a);
    return c * c;
}

}  // namespace

NoiseSchedule make_cosine_schedule(int T, real beta_min, real beta_max) {
    require(T >= 1, Status::InvalidArgument, "schedule length T must be >= 1");
    require(beta_min > 0.0, Status::InvalidArgument, "beta_min must be positive");
    require(beta_max < 1.0, Status::InvalidArgument, "beta_max must be < 1");
    require(beta_min < beta_max, Status::InvalidArgument, "beta_min must be < beta_max");

    NoiseSchedule sch;
    sch.T = T;
    sch.beta.resize(T);
    sch.alpha.resize(T);
    sch.alpha_bar.resize(T);
    sch.sigma.resize(T);

    real f0 = cosine_f(0.0);
    real prev_abar = 1.0;
    for (int t = 0; t < T; ++t) {
        real abar_hi = cosine_f(static_cast<real>(t) / T) / f0;
        real abar_lo = cosine_f(static_cast<real>(t + 1) / T) / f0;
        real beta = 1.0 - abar_lo / abar_hi;
        beta = std::clamp(beta, beta_min, beta_max);
        sch.beta[t] = beta;
        sch.alpha[t] = 1.0 - beta;
        sch.alpha_bar[t] = prev_abar * sch.alpha[t];
        real one_minus_prev = 1.0 - prev_abar;
        real one_minus_cur = 1.0 - sch.alpha_bar[t];
        sch.sigma[t] = (t == 0) ? 0.0 : std::sqrt(one_minus_prev / one_minus_cur * beta);
        prev_abar = sch.alpha_bar[t];
    }
    return sch;
}

Tensor sample_offset_noise(const std::vector<int>& shape, real lambda, Rng& rng) {
    require(lambda >= 0.0, Status::InvalidArgument, "offset noise lambda must be >= 0");
    require(shape.size() == 4, Status::InvalidArgument, "offset noise expects NCHW shape");
    Tensor eps(shape);
    rng.normal_fill(eps.data(), eps.size());
    if (lambda > 0.0) {
        const int n = shape[0], c = shape[1], hw = shape[2] * shape[3];
        const real scale = std::sqrt(lambda);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < c; ++j) {
                real bias = scale * rng.normal();
                real* p = eps.data() + (static_cast<std::size_t>(i) * c + j) * hw;
                for (int k = 0; k < hw; ++k) p[k] += bias;
            }
        }
    }
    return eps;
}

Tensor sample_offset_noise(const std::vector<int>& shape, real lambda, std::uint64_t seed) {
    Rng rng(seed);
    return sample_offset_noise(shape, lambda, rng);
}

Tensor forward_noise(const Tensor& z0, int t, const NoiseSchedule& schedule,
                     const Tensor& noise) {
    require(t >= 0 && t < schedule.T, Status::InvalidArgument,
            "timestep out of range: " + std::to_string(t));
    require(z0.same_shape(noise), Status::InvalidArgument,
            "z0/noise shape mismatch: " + z0.shape_str() + " vs " + noise.shape_str());
    real abar = schedule.alpha_bar[t];
    real a = std::sqrt(abar);
    real b = std::sqrt(1.0 - abar);
    Tensor out = Tensor::zeros_like(z0);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * z0[i] + b * noise[i];
    return out;
}

Tensor forward_noise(const Tensor& z0, const std::vector<int>& t,
                     const NoiseSchedule& schedule, const Tensor& noise) {
    require(z0.ndim() == 4, Status::InvalidArgument, "batched forward_noise expects NCHW");
    require(static_cast<int>(t.size()) == z0.dim(0), Status::InvalidArgument,
            "one timestep per sample required");
    require(z0.same_shape(noise), Status::InvalidArgument,
            "z0/noise shape mismatch: " + z0.shape_str() + " vs " + noise.shape_str());
    Tensor out = Tensor::zeros_like(z0);
    const std::size_t stride = z0.size() / static_cast<std::size_t>(z0.dim(0));
    for (int i = 0; i < z0.dim(0); ++i) {
        require(t[i] >= 0 && t[i] < schedule.T, Status::InvalidArgument,
                "timestep out of range: " + std::to_string(t[i]));
        real abar = schedule.alpha_bar[t[i]];
        real a = std::sqrt(abar);
        real b = std::sqrt(1.0 - abar);
        const std::size_t base = stride * static_cast<std::size_t>(i);
        for (std::size_t k = 0; k < stride; ++k)
            out[base + k] = a * z0[base + k] + b * noise[base + k];
    }
    return out;
}

}  // namespace bsldm
