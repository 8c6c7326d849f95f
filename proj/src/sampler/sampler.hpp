#pragma once

#include <cstdint>
#include <vector>

#include "diffusion/schedule.hpp"
#include "ldm/ldm.hpp"
#include "vq/vqgan.hpp"

namespace bsldm::sampler {

enum class ThresholdKind { None, Static, Dynamic, Temporal };

struct ThresholdPolicy {
    ThresholdKind kind = ThresholdKind::Temporal;
    real omega = 0.003;     // temporal slope, > 0
    real intercept = 1.4;   // temporal intercept b, >= 1
    real percentile = 99.5; // dynamic percentile, in (50, 100]
};

ThresholdKind threshold_kind_from_name(const std::string& name);
std::string threshold_kind_name(ThresholdKind kind);
void validate_policy(const ThresholdPolicy& policy);

// Per-step clamp of latents.
//   none:     identity
//   static:   clamp to [-1, 1]
//   dynamic:  s = per-sample percentile of |z|; if s > 1 clamp to [-s, s] and
//             divide by s, else clamp to [-1, 1]
//   temporal: s = omega * t + intercept, clamp to [-s, s], no normalization
Tensor apply_threshold(const Tensor& z, int t, const ThresholdPolicy& policy);

// One reverse diffusion step:
//   z_{t-1} = (z_t - ((1-alpha_t)/sqrt(1-abar_t)) * eps_hat) / sqrt(alpha_t)
//             + sigma_t * noise
// followed by the threshold clamp at the destination timestep t-1. noise must
// be empty (treated as zero) when t = 0.
Tensor reverse_step(const Tensor& z_t, int t, const Tensor& eps_hat,
                    const NoiseSchedule& schedule, const ThresholdPolicy& policy,
                    const Tensor& noise);

struct SamplerTraceRow {
    int t = 0;        // the step being undone
    real s = 0.0;     // clamp bound applied to this step's output (0 if none)
    real z_min = 0.0, z_max = 0.0, z_mean = 0.0, z_std = 0.0;
};

struct SampleResult {
    Tensor images;  // (N,1,H,W) in (-1,1)
    std::vector<SamplerTraceRow> trace;  // T rows when requested, batch-aggregated
};

// Full conditional generation: encode the CXR batch, run T reverse steps with
// per-image noise streams (seeds[i] drives image i, so results do not depend
// on batch composition), quantize the final latent, decode. cxr in [-1,1].
SampleResult sample_soft_tissue(vq::VqGan& compressor, ldm::UNet& estimator,
                                const Tensor& cxr, const NoiseSchedule& schedule,
                                const ThresholdPolicy& policy,
                                const std::vector<std::uint64_t>& seeds, bool want_trace);

}  // namespace bsldm::sampler
