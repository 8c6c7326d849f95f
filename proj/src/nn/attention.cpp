#include "nn/attention.hpp"

#include <Eigen/Core>
#include <cmath>

namespace bsldm::nn {

using MatRM = Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

SelfAttention2d::SelfAttention2d(std::string name, int channels, int norm_groups)
    : channels_(channels),
      norm_(name + ".norm", channels, norm_groups),
      q_(name + ".q", channels, channels, 1, 1, 0),
      k_(name + ".k", channels, channels, 1, 1, 0),
      v_(name + ".v", channels, channels, 1, 1, 0),
      proj_(name + ".proj", channels, channels, 1, 1, 0) {}

void SelfAttention2d::init_weights(Rng& rng) {
    q_.init_weights(rng);
    k_.init_weights(rng);
    v_.init_weights(rng);
    proj_.init_weights(rng);
    // Zero-init the output projection so the block starts as identity.
    proj_.weight.value.fill(0.0);
}

Tensor SelfAttention2d::forward(const Tensor& x) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int m = h * w;
    require(c == channels_, Status::InvalidArgument, "attention channel mismatch");

    Tensor xn = norm_.forward(x);
    qv_ = q_.forward(xn);
    kv_ = k_.forward(xn);
    vv_ = v_.forward(xn);

    probs_.assign(static_cast<std::size_t>(n) * m * m, 0.0);
    Tensor attn({n, c, h, w});
    const real scale = 1.0 / std::sqrt(static_cast<real>(c));

    for (int i = 0; i < n; ++i) {
        CMapRM q(qv_.data() + qv_.idx(i, 0, 0, 0), c, m);
        CMapRM k(kv_.data() + kv_.idx(i, 0, 0, 0), c, m);
        CMapRM v(vv_.data() + vv_.idx(i, 0, 0, 0), c, m);
        MapRM p(probs_.data() + static_cast<std::size_t>(i) * m * m, m, m);

        p.noalias() = (q.transpose() * k) * scale;  // scores: query rows, key cols
        for (int r = 0; r < m; ++r) {
            real mx = p.row(r).maxCoeff();
            p.row(r) = (p.row(r).array() - mx).exp();
            p.row(r) /= p.row(r).sum();
        }
        MapRM out(attn.data() + attn.idx(i, 0, 0, 0), c, m);
        out.noalias() = v * p.transpose();  // out[c,i] = sum_j v[c,j] p[i,j]
    }

    Tensor y = proj_.forward(attn);
    y.add_(x);
    return y;
}

Tensor SelfAttention2d::backward(const Tensor& gy) {
    const int n = gy.dim(0), c = gy.dim(1), h = gy.dim(2), w = gy.dim(3);
    const int m = h * w;
    const real scale = 1.0 / std::sqrt(static_cast<real>(c));

    Tensor go = proj_.backward(gy);  // grad w.r.t. attn output

    Tensor gq({n, c, h, w}), gk({n, c, h, w}), gv({n, c, h, w});
    for (int i = 0; i < n; ++i) {
        CMapRM gom(go.data() + go.idx(i, 0, 0, 0), c, m);
        CMapRM v(vv_.data() + vv_.idx(i, 0, 0, 0), c, m);
        CMapRM q(qv_.data() + qv_.idx(i, 0, 0, 0), c, m);
        CMapRM k(kv_.data() + kv_.idx(i, 0, 0, 0), c, m);
        CMapRM p(probs_.data() + static_cast<std::size_t>(i) * m * m, m, m);

        MatRM gp(m, m);
        gp.noalias() = gom.transpose() * v;        // gP[i,j] = sum_c go[c,i] v[c,j]
        MapRM gvm(gv.data() + gv.idx(i, 0, 0, 0), c, m);
        gvm.noalias() = gom * p;                   // gv[c,j] = sum_i go[c,i] p[i,j]

        // softmax backward, row-wise
        MatRM gs(m, m);
        for (int r = 0; r < m; ++r) {
            real dot = (gp.row(r).array() * p.row(r).array()).sum();
            gs.row(r) = p.row(r).array() * (gp.row(r).array() - dot);
        }
        MapRM gqm(gq.data() + gq.idx(i, 0, 0, 0), c, m);
        MapRM gkm(gk.data() + gk.idx(i, 0, 0, 0), c, m);
        gqm.noalias() = (k * gs.transpose()) * scale;  // gq[c,i] = sum_j gs[i,j] k[c,j] * scale
        gkm.noalias() = (q * gs) * scale;              // gk[c,j] = sum_i gs[i,j] q[c,i] * scale
    }

    Tensor gxn = q_.backward(gq);
    gxn.add_(k_.backward(gk));
    gxn.add_(v_.backward(gv));
    Tensor gx = norm_.backward(gxn);
    gx.add_(gy);  // residual path
    return gx;
}

void SelfAttention2d::collect_params(std::vector<Param*>& out) {
    norm_.collect_params(out);
    q_.collect_params(out);
    k_.collect_params(out);
    v_.collect_params(out);
    proj_.collect_params(out);
}

}  // namespace bsldm::nn
