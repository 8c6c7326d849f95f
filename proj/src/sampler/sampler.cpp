#include "sampler/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace bsldm::sampler {

ThresholdKind threshold_kind_from_name(const std::string& name) {
    if (name == "none") return ThresholdKind::None;
    if (name == "static") return ThresholdKind::Static;
    if (name == "dynamic") return ThresholdKind::Dynamic;
    if (name == "temporal") return ThresholdKind::Temporal;
    fail(Status::InvalidArgument, "unknown threshold kind: " + name);
}

std::string threshold_kind_name(ThresholdKind kind) {
    switch (kind) {
        case ThresholdKind::None: return "none";
        case ThresholdKind::Static: return "static";
        case ThresholdKind::Dynamic: return "dynamic";
        case ThresholdKind::Temporal: return "temporal";
    }
    fail(Status::Internal, "bad threshold kind");
}

void validate_policy(const ThresholdPolicy& policy) {
    if (policy.kind == ThresholdKind::Temporal) {
        require(policy.omega > 0.0, Status::InvalidArgument, "temporal threshold needs omega > 0");
        require(policy.intercept >= 1.0, Status::InvalidArgument,
                "temporal threshold needs intercept >= 1");
    }
    if (policy.kind == ThresholdKind::Dynamic) {
        require(policy.percentile > 50.0 && policy.percentile <= 100.0, Status::InvalidArgument,
                "dynamic threshold needs percentile in (50, 100]");
    }
}

namespace {

void clamp_all(Tensor& z, real bound) {
    real* p = z.data();
    for (std::int64_t i = 0; i < z.size(); ++i) p[i] = std::clamp(p[i], -bound, bound);
}

// Percentile of |z| over one sample, linear interpolation between order stats.
real abs_percentile(const real* p, std::int64_t m, real pct) {
    std::vector<real> mag(static_cast<size_t>(m));
    for (std::int64_t i = 0; i < m; ++i) mag[static_cast<size_t>(i)] = std::fabs(p[i]);
    std::sort(mag.begin(), mag.end());
    const real rank = pct / 100.0 * static_cast<real>(m - 1);
    const auto lo = static_cast<std::int64_t>(std::floor(rank));
    const auto hi = std::min(lo + 1, m - 1);
    const real frac = rank - static_cast<real>(lo);
    return mag[static_cast<size_t>(lo)] * (1.0 - frac) + mag[static_cast<size_t>(hi)] * frac;
}

}  // namespace

Tensor apply_threshold(const Tensor& z, int t, const ThresholdPolicy& policy) {
    validate_policy(policy);
    Tensor out = z;
    switch (policy.kind) {
        case ThresholdKind::None:
            break;
        case ThresholdKind::Static:
            clamp_all(out, 1.0);
            break;
        case ThresholdKind::Dynamic: {
            require(out.ndim() == 4, Status::InvalidArgument, "dynamic threshold expects NCHW");
            const std::int64_t per = out.size() / out.dim(0);
            for (std::int64_t n = 0; n < out.dim(0); ++n) {
                real* p = out.data() + n * per;
                const real s = abs_percentile(p, per, policy.percentile);
                if (s > 1.0) {
                    for (std::int64_t i = 0; i < per; ++i)
                        p[i] = std::clamp(p[i], -s, s) / s;
                } else {
                    for (std::int64_t i = 0; i < per; ++i) p[i] = std::clamp(p[i], -1.0, 1.0);
                }
            }
            break;
        }
        case ThresholdKind::Temporal: {
            const real s = policy.omega * static_cast<real>(t) + policy.intercept;
            clamp_all(out, s);
            break;
        }
    }
    return out;
}

Tensor reverse_step(const Tensor& z_t, int t, const Tensor& eps_hat,
                    const NoiseSchedule& schedule, const ThresholdPolicy& policy,
                    const Tensor& noise) {
    require(t >= 0 && t < schedule.T, Status::InvalidArgument, "reverse_step: t out of range");
    require(z_t.same_shape(eps_hat), Status::InvalidArgument,
            "reverse_step: z_t and eps_hat shapes differ");
    const bool have_noise = !noise.empty();
    if (have_noise)
        require(noise.same_shape(z_t), Status::InvalidArgument, "reverse_step: bad noise shape");
    if (t == 0 && have_noise) {
        for (std::int64_t i = 0; i < noise.size(); ++i)
            require(noise[i] == 0.0, Status::Precondition, "reverse_step: noise must be 0 at t=0");
    }

    const real a = schedule.alpha[static_cast<size_t>(t)];
    const real abar = schedule.alpha_bar[static_cast<size_t>(t)];
    const real inv_sqrt_a = 1.0 / std::sqrt(a);
    const real coef = (1.0 - a) / std::sqrt(1.0 - abar);
    const real sigma = schedule.sigma[static_cast<size_t>(t)];

    Tensor out(z_t.shape());
    for (std::int64_t i = 0; i < z_t.size(); ++i) {
        real v = inv_sqrt_a * (z_t[i] - coef * eps_hat[i]);
        if (have_noise && t > 0) v += sigma * noise[i];
        out[i] = v;
    }
    return apply_threshold(out, t - 1, policy);
}

namespace {

SamplerTraceRow trace_row(const Tensor& z, int t, real s) {
    SamplerTraceRow row;
    row.t = t;
    row.s = s;
    real mn = z[0], mx = z[0], sum = 0.0, sq = 0.0;
    for (std::int64_t i = 0; i < z.size(); ++i) {
        const real v = z[i];
        mn = std::min(mn, v);
        mx = std::max(mx, v);
        sum += v;
        sq += v * v;
    }
    const real n = static_cast<real>(z.size());
    row.z_min = mn;
    row.z_max = mx;
    row.z_mean = sum / n;
    const real var = std::max(sq / n - row.z_mean * row.z_mean, 0.0);
    row.z_std = std::sqrt(var);
    return row;
}

}  // namespace

SampleResult sample_soft_tissue(vq::VqGan& compressor, ldm::UNet& estimator,
                                const Tensor& cxr, const NoiseSchedule& schedule,
                                const ThresholdPolicy& policy,
                                const std::vector<std::uint64_t>& seeds, bool want_trace) {
    validate_policy(policy);
    require(cxr.ndim() == 4 && cxr.dim(1) == 1, Status::InvalidArgument,
            "sample_soft_tissue expects (N,1,H,W) input");
    const auto n = cxr.dim(0);
    require(static_cast<std::int64_t>(seeds.size()) == n, Status::InvalidArgument,
            "sample_soft_tissue: one seed per image required");

    Tensor cond = compressor.encode(cxr);
    const std::int64_t per = cond.size() / n;

    std::vector<Rng> streams;
    streams.reserve(seeds.size());
    for (auto s : seeds) streams.emplace_back(s);

    Tensor z(cond.shape());
    for (std::int64_t i = 0; i < n; ++i)
        streams[static_cast<size_t>(i)].normal_fill(z.data() + i * per, per);

    SampleResult result;
    if (want_trace) result.trace.reserve(static_cast<size_t>(schedule.T));

    Tensor noise(cond.shape());
    std::vector<int> steps(static_cast<size_t>(n));
    for (int t = schedule.T - 1; t >= 0; --t) {
        std::fill(steps.begin(), steps.end(), t);
        Tensor eps_hat = ldm::predict_noise(estimator, z, steps, cond);
        Tensor step_noise;  // empty at t=0, per-image plain Gaussian otherwise
        if (t > 0) {
            for (std::int64_t i = 0; i < n; ++i)
                streams[static_cast<size_t>(i)].normal_fill(noise.data() + i * per, per);
            step_noise = noise;
        }
        z = reverse_step(z, t, eps_hat, schedule, policy, step_noise);
        if (want_trace) {
            real s = 0.0;
            if (policy.kind == ThresholdKind::Static) s = 1.0;
            if (policy.kind == ThresholdKind::Temporal)
                s = policy.omega * static_cast<real>(t - 1) + policy.intercept;
            result.trace.push_back(trace_row(z, t, s));
        }
    }

    auto q = vq::quantize(z, compressor.codebook());
    result.images = compressor.decode(q.z_q);
    return result;
}

}  // namespace bsldm::sampler
