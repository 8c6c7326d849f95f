#include "nn/norm.hpp"

#include <cmath>

namespace bsldm::nn {

GroupNorm::GroupNorm(std::string name, int channels, int groups, real eps)
    : gamma(name + ".gamma", {channels}),
      beta(name + ".beta", {channels}),
      channels_(channels), groups_(groups), eps_(eps) {
    require(groups >= 1 && channels % groups == 0, Status::InvalidArgument,
            "groupnorm: groups must divide channels");
    gamma.value.fill(1.0);
}

Tensor GroupNorm::forward(const Tensor& x) {
    require(x.ndim() == 4 && x.dim(1) == channels_, Status::InvalidArgument,
            "groupnorm input shape mismatch: " + x.shape_str());
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int cpg = channels_ / groups_;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const std::size_t gsize = cpg * plane;

    xhat_ = Tensor::zeros_like(x);
    istd_.assign(static_cast<std::size_t>(n) * groups_, 0.0);
    Tensor y = Tensor::zeros_like(x);

    for (int i = 0; i < n; ++i) {
        for (int g = 0; g < groups_; ++g) {
            const real* src = x.data() + x.idx(i, g * cpg, 0, 0);
            real mean = 0.0;
            for (std::size_t k = 0; k < gsize; ++k) mean += src[k];
            mean /= static_cast<real>(gsize);
            real var = 0.0;
            for (std::size_t k = 0; k < gsize; ++k) {
                real d = src[k] - mean;
                var += d * d;
            }
            var /= static_cast<real>(gsize);
            real istd = 1.0 / std::sqrt(var + eps_);
            istd_[static_cast<std::size_t>(i) * groups_ + g] = istd;

            real* xh = xhat_.data() + xhat_.idx(i, g * cpg, 0, 0);
            real* dst = y.data() + y.idx(i, g * cpg, 0, 0);
            for (int c = 0; c < cpg; ++c) {
                real gm = gamma.value[g * cpg + c];
                real bt = beta.value[g * cpg + c];
                for (std::size_t k = 0; k < plane; ++k) {
                    std::size_t off = c * plane + k;
                    real v = (src[off] - mean) * istd;
                    xh[off] = v;
                    dst[off] = gm * v + bt;
                }
            }
        }
    }
    return y;
}

Tensor GroupNorm::backward(const Tensor& gy) {
    const int n = gy.dim(0), h = gy.dim(2), w = gy.dim(3);
    const int cpg = channels_ / groups_;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const std::size_t gsize = cpg * plane;
    const real m = static_cast<real>(gsize);

    Tensor gx = Tensor::zeros_like(gy);
    for (int i = 0; i < n; ++i) {
        for (int g = 0; g < groups_; ++g) {
            const real* gyp = gy.data() + gy.idx(i, g * cpg, 0, 0);
            const real* xh = xhat_.data() + xhat_.idx(i, g * cpg, 0, 0);
            real istd = istd_[static_cast<std::size_t>(i) * groups_ + g];

            // Accumulate sums of gamma*gy and gamma*gy*xhat over the group,
            // plus per-channel parameter grads.
            real sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
            for (int c = 0; c < cpg; ++c) {
                real gm = gamma.value[g * cpg + c];
                real gsum = 0.0, gxsum = 0.0;
                for (std::size_t k = 0; k < plane; ++k) {
                    std::size_t off = c * plane + k;
                    real dxh = gm * gyp[off];
                    sum_dxhat += dxh;
                    sum_dxhat_xhat += dxh * xh[off];
                    gsum += gyp[off];
                    gxsum += gyp[off] * xh[off];
                }
                beta.grad[g * cpg + c] += gsum;
                gamma.grad[g * cpg + c] += gxsum;
            }

            real* gxp = gx.data() + gx.idx(i, g * cpg, 0, 0);
            for (int c = 0; c < cpg; ++c) {
                real gm = gamma.value[g * cpg + c];
                for (std::size_t k = 0; k < plane; ++k) {
                    std::size_t off = c * plane + k;
                    real dxh = gm * gyp[off];
                    gxp[off] = istd * (dxh - sum_dxhat / m - xh[off] * sum_dxhat_xhat / m);
                }
            }
        }
    }
    return gx;
}

void GroupNorm::collect_params(std::vector<Param*>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
}

}  // namespace bsldm::nn
