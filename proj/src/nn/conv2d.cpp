#include "nn/conv2d.hpp"

#include <Eigen/Core>
#include <cmath>

namespace bsldm::nn {

using MatRM = Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

Conv2d::Conv2d(std::string name, int in_ch, int out_ch, int kernel, int stride, int pad)
    : weight(name + ".weight", {out_ch, in_ch, kernel, kernel}),
      bias(name + ".bias", {out_ch}),
      in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride), pad_(pad) {
    require(kernel >= 1 && stride >= 1 && pad >= 0, Status::InvalidArgument,
            "bad conv geometry");
}

void Conv2d::init_weights(Rng& rng) {
    real fan_in = static_cast<real>(in_ch_ * kernel_ * kernel_);
    real std_dev = std::sqrt(2.0 / fan_in);
    for (std::size_t i = 0; i < weight.value.size(); ++i)
        weight.value[i] = std_dev * rng.normal();
    bias.value.fill(0.0);
}

void Conv2d::im2col(const real* src, int h, int w, int oh, int ow) {
    const int k = kernel_;
    const std::size_t m = static_cast<std::size_t>(oh) * ow;
    real* col = col_.data();
    for (int ci = 0; ci < in_ch_; ++ci) {
        const real* plane = src + static_cast<std::size_t>(ci) * h * w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                real* dst = col + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * m;
                for (int oy = 0; oy < oh; ++oy) {
                    int iy = oy * stride_ - pad_ + ky;
                    if (iy < 0 || iy >= h) {
                        for (int ox = 0; ox < ow; ++ox) dst[oy * ow + ox] = 0.0;
                        continue;
                    }
                    const real* row = plane + static_cast<std::size_t>(iy) * w;
                    for (int ox = 0; ox < ow; ++ox) {
                        int ix = ox * stride_ - pad_ + kx;
                        dst[oy * ow + ox] = (ix >= 0 && ix < w) ? row[ix] : 0.0;
                    }
                }
            }
        }
    }
}

Tensor Conv2d::forward(const Tensor& x) {
    require(x.ndim() == 4 && x.dim(1) == in_ch_, Status::InvalidArgument,
            "conv input shape mismatch: " + x.shape_str());
    x_ = x;
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int oh = (h + 2 * pad_ - kernel_) / stride_ + 1;
    const int ow = (w + 2 * pad_ - kernel_) / stride_ + 1;
    require(oh >= 1 && ow >= 1, Status::InvalidArgument, "conv output would be empty");

    const int kk = in_ch_ * kernel_ * kernel_;
    const std::size_t m = static_cast<std::size_t>(oh) * ow;
    col_.resize(static_cast<std::size_t>(kk) * m);

    Tensor y({n, out_ch_, oh, ow});
    CMapRM wmat(weight.value.data(), out_ch_, kk);
    for (int i = 0; i < n; ++i) {
        im2col(x.data() + x.idx(i, 0, 0, 0), h, w, oh, ow);
        CMapRM col(col_.data(), kk, static_cast<int>(m));
        MapRM out(y.data() + y.idx(i, 0, 0, 0), out_ch_, static_cast<int>(m));
        out.noalias() = wmat * col;
        for (int oc = 0; oc < out_ch_; ++oc)
            out.row(oc).array() += bias.value[oc];
    }
    return y;
}

Tensor Conv2d::backward(const Tensor& gy) {
    const int n = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
    const int oh = gy.dim(2), ow = gy.dim(3);
    const int kk = in_ch_ * kernel_ * kernel_;
    const std::size_t m = static_cast<std::size_t>(oh) * ow;
    col_.resize(static_cast<std::size_t>(kk) * m);

    Tensor gx = Tensor::zeros_like(x_);
    CMapRM wmat(weight.value.data(), out_ch_, kk);
    MapRM gwmat(weight.grad.data(), out_ch_, kk);
    MatRM gcol(kk, static_cast<int>(m));

    for (int i = 0; i < n; ++i) {
        CMapRM g(gy.data() + gy.idx(i, 0, 0, 0), out_ch_, static_cast<int>(m));
        im2col(x_.data() + x_.idx(i, 0, 0, 0), h, w, oh, ow);
        CMapRM col(col_.data(), kk, static_cast<int>(m));
        gwmat.noalias() += g * col.transpose();
        for (int oc = 0; oc < out_ch_; ++oc)
            bias.grad[oc] += g.row(oc).sum();

        gcol.noalias() = wmat.transpose() * g;
        // col2im scatter-add
        real* gxp = gx.data() + gx.idx(i, 0, 0, 0);
        const int k = kernel_;
        for (int ci = 0; ci < in_ch_; ++ci) {
            real* plane = gxp + static_cast<std::size_t>(ci) * h * w;
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    const real* src = gcol.data() +
                        ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * m;
                    for (int oy = 0; oy < oh; ++oy) {
                        int iy = oy * stride_ - pad_ + ky;
                        if (iy < 0 || iy >= h) continue;
                        real* row = plane + static_cast<std::size_t>(iy) * w;
                        for (int ox = 0; ox < ow; ++ox) {
                            int ix = ox * stride_ - pad_ + kx;
                            if (ix >= 0 && ix < w) row[ix] += src[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }
    return gx;
}

void Conv2d::collect_params(std::vector<Param*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
}

}  // namespace bsldm::nn
