#include "metrics/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "core/error.hpp"
#include "metrics/fft.hpp"

namespace bsldm::metrics {

real bsr(const Tensor& s, const Tensor& s_hat, const Tensor& bone) {
    require(s.same_shape(s_hat) && s.same_shape(bone), Status::InvalidArgument,
            "bsr: shape mismatch");
    require(s.size() > 0, Status::InvalidArgument, "bsr: empty input");
    real residual = 0.0, denom = 0.0;
    for (std::int64_t i = 0; i < s.size(); ++i) {
        const real d = s[i] - s_hat[i];
        residual += d * d;
        denom += bone[i] * bone[i];
    }
    if (residual == 0.0) return 1.0;
    require(denom > 0.0, Status::InvalidArgument, "bsr: all-zero bone image, ratio undefined");
    return 1.0 - residual / denom;
}

MsePsnr mse_psnr(const Tensor& s, const Tensor& s_hat, real max_value) {
    require(s.same_shape(s_hat), Status::InvalidArgument, "mse_psnr: shape mismatch");
    require(s.size() > 0, Status::InvalidArgument, "mse_psnr: empty input");
    require(max_value > 0.0, Status::InvalidArgument, "mse_psnr: max_value must be positive");
    real acc = 0.0;
    for (std::int64_t i = 0; i < s.size(); ++i) {
        const real d = s[i] - s_hat[i];
        acc += d * d;
    }
    MsePsnr out;
    out.mse = acc / static_cast<real>(s.size());
    out.psnr = out.mse == 0.0 ? std::numeric_limits<real>::infinity()
                              : 10.0 * std::log10(max_value * max_value / out.mse);
    return out;
}

real lpips(const Tensor& s, const Tensor& s_hat, FeatureExtractor& extractor) {
    require(s.same_shape(s_hat), Status::InvalidArgument, "lpips: shape mismatch");
    return feature_distance(extractor, s, s_hat);
}

std::unique_ptr<FeatureExtractor> make_extractor(const std::string& name) {
    if (name == "identity") return std::make_unique<IdentityExtractor>();
    if (name == "seeded-random-v1") return std::make_unique<SeededConvExtractor>();
    fail(Status::InvalidArgument, "perceptual extractor unavailable: " + name);
}

PsdProfile psd_profile(const std::vector<Tensor>& images, int n_bins) {
    require(n_bins >= 2, Status::InvalidArgument, "psd_profile: n_bins must be >= 2");
    require(!images.empty(), Status::InvalidArgument, "psd_profile: empty image set");

    int side = 0;
    for (const auto& t : images) {
        require(t.ndim() == 4 && t.dim(1) == 1, Status::InvalidArgument,
                "psd_profile expects (N,1,H,W) tensors");
        require(t.dim(2) == t.dim(3), Status::InvalidArgument, "psd_profile: images must be square");
        if (side == 0) side = static_cast<int>(t.dim(2));
        require(static_cast<int>(t.dim(2)) == side, Status::InvalidArgument,
                "psd_profile: images must share one size");
    }

    // Signed frequency radius per DFT site, binned linearly up to the corner.
    const real r_max = std::sqrt(2.0) * static_cast<real>(side) / 2.0;
    PsdProfile prof;
    prof.centers.resize(static_cast<size_t>(n_bins));
    prof.power.assign(static_cast<size_t>(n_bins), 0.0);
    prof.sites.assign(static_cast<size_t>(n_bins), 0);
    for (int b = 0; b < n_bins; ++b)
        prof.centers[static_cast<size_t>(b)] = (static_cast<real>(b) + 0.5) * r_max /
                                               static_cast<real>(n_bins);

    std::vector<int> site_bin(static_cast<size_t>(side) * static_cast<size_t>(side));
    std::vector<std::int64_t> per_image_sites(static_cast<size_t>(n_bins), 0);
    for (int y = 0; y < side; ++y) {
        const int fy = y <= side / 2 ? y : y - side;
        for (int x = 0; x < side; ++x) {
            const int fx = x <= side / 2 ? x : x - side;
            const real r = std::sqrt(static_cast<real>(fy) * fy + static_cast<real>(fx) * fx);
            int b = static_cast<int>(r / r_max * static_cast<real>(n_bins));
            b = std::min(b, n_bins - 1);
            site_bin[static_cast<size_t>(y) * side + x] = b;
            ++per_image_sites[static_cast<size_t>(b)];
        }
    }

    std::vector<cplx> spec;
    for (const auto& t : images) {
        for (std::int64_t n = 0; n < t.dim(0); ++n) {
            dft_2d(t.data() + n * side * side, side, side, spec);
            for (size_t i = 0; i < spec.size(); ++i)
                prof.power[static_cast<size_t>(site_bin[i])] += std::norm(spec[i]);
            ++prof.samples;
        }
    }
    for (int b = 0; b < n_bins; ++b) {
        const auto total = per_image_sites[static_cast<size_t>(b)] *
                           static_cast<std::int64_t>(prof.samples);
        prof.sites[static_cast<size_t>(b)] = per_image_sites[static_cast<size_t>(b)];
        if (total > 0) prof.power[static_cast<size_t>(b)] /= static_cast<real>(total);
    }
    return prof;
}

SummaryStat summarize(const std::vector<real>& values) {
    require(!values.empty(), Status::InvalidArgument, "summarize: no values");
    SummaryStat s;
    for (real v : values) s.mean += v;
    s.mean /= static_cast<real>(values.size());
    if (!std::isfinite(s.mean)) return s;  // inf - inf below would poison sd
    if (values.size() > 1) {
        real acc = 0.0;
        for (real v : values) {
            const real d = v - s.mean;
            acc += d * d;
        }
        s.sd = std::sqrt(acc / static_cast<real>(values.size() - 1));
    }
    return s;
}

std::string format_mean_std(const SummaryStat& s, int decimals) {
    char buf[96];
    if (!std::isfinite(s.mean)) {
        std::snprintf(buf, sizeof(buf), "%s ± %.*f", s.mean > 0 ? "inf" : "-inf", decimals, s.sd);
        return buf;
    }
    std::snprintf(buf, sizeof(buf), "%.*f ± %.*f", decimals, s.mean, decimals, s.sd);
    return buf;
}

}  // namespace bsldm::metrics
