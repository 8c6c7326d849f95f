#pragma once

#include <memory>
#include <string>
#include <vector>

#include "core/tensor.hpp"
#include "metrics/features.hpp"

namespace bsldm::metrics {

// Bone suppression ratio: 1 - sum((S - S_hat)^2) / sum(B^2). A zero residual
// is a perfect suppression regardless of B; otherwise an all-zero bone image
// leaves the ratio undefined and raises.
real bsr(const Tensor& s, const Tensor& s_hat, const Tensor& bone);

struct MsePsnr {
    real mse = 0.0;
    real psnr = 0.0;  // +inf when mse == 0
};
MsePsnr mse_psnr(const Tensor& s, const Tensor& s_hat, real max_value);

// Mean squared feature distance per layer, averaged over layers. With the
// identity extractor this reduces to plain MSE.
real lpips(const Tensor& s, const Tensor& s_hat, FeatureExtractor& extractor);

// "identity" or "seeded-random-v1"; anything else (e.g. a pretrained net that
// is not shipped) raises rather than silently substituting.
std::unique_ptr<FeatureExtractor> make_extractor(const std::string& name);

struct PsdProfile {
    std::vector<real> centers;       // bin center spatial frequency (cycles/image)
    std::vector<real> power;         // mean squared DFT magnitude per bin
    std::vector<std::int64_t> sites; // frequency sites falling in each bin
    int samples = 0;
};

// Radially averaged power spectrum over a set of square same-size images,
// each tensor (N,1,H,W). Bin 0 contains DC.
PsdProfile psd_profile(const std::vector<Tensor>& images, int n_bins);

struct SummaryStat {
    real mean = 0.0;
    real sd = 0.0;  // sample std, ddof=1; 0 for a single value
};
SummaryStat summarize(const std::vector<real>& values);

// "0.976 ± 0.018" style with a fixed decimal count.
std::string format_mean_std(const SummaryStat& s, int decimals);

}  // namespace bsldm::metrics
