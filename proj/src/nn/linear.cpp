#include "nn/linear.hpp"

#include <Eigen/Core>
#include <cmath>

namespace bsldm::nn {

using MatRM = Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

Linear::Linear(std::string name, int in_dim, int out_dim)
    : weight(name + ".weight", {out_dim, in_dim}),
      bias(name + ".bias", {out_dim}),
      in_dim_(in_dim), out_dim_(out_dim) {}

void Linear::init_weights(Rng& rng) {
    real std_dev = std::sqrt(2.0 / static_cast<real>(in_dim_));
    for (std::size_t i = 0; i < weight.value.size(); ++i)
        weight.value[i] = std_dev * rng.normal();
    bias.value.fill(0.0);
}

Tensor Linear::forward(const Tensor& x) {
    require(x.ndim() == 2 && x.dim(1) == in_dim_, Status::InvalidArgument,
            "linear input shape mismatch: " + x.shape_str());
    x_ = x;
    const int n = x.dim(0);
    Tensor y({n, out_dim_});
    CMapRM xm(x.data(), n, in_dim_);
    CMapRM wm(weight.value.data(), out_dim_, in_dim_);
    MapRM ym(y.data(), n, out_dim_);
    ym.noalias() = xm * wm.transpose();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < out_dim_; ++j) ym(i, j) += bias.value[j];
    return y;
}

Tensor Linear::backward(const Tensor& gy) {
    const int n = x_.dim(0);
    Tensor gx({n, in_dim_});
    CMapRM gym(gy.data(), n, out_dim_);
    CMapRM xm(x_.data(), n, in_dim_);
    CMapRM wm(weight.value.data(), out_dim_, in_dim_);
    MapRM gwm(weight.grad.data(), out_dim_, in_dim_);
    MapRM gxm(gx.data(), n, in_dim_);
    gwm.noalias() += gym.transpose() * xm;
    for (int j = 0; j < out_dim_; ++j) bias.grad[j] += gym.col(j).sum();
    gxm.noalias() = gym * wm;
    return gx;
}

void Linear::collect_params(std::vector<Param*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
}

}  // namespace bsldm::nn
