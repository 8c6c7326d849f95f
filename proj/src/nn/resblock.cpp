#include "nn/resblock.hpp"

namespace bsldm::nn {

ResBlock::ResBlock(std::string name, int in_ch, int out_ch, int temb_dim, int norm_groups)
    : in_ch_(in_ch), out_ch_(out_ch), temb_dim_(temb_dim),
      norm1_(name + ".norm1", in_ch, norm_groups),
      conv1_(name + ".conv1", in_ch, out_ch, 3, 1, 1),
      norm2_(name + ".norm2", out_ch, norm_groups),
      conv2_(name + ".conv2", out_ch, out_ch, 3, 1, 1) {
    if (temb_dim > 0) temb_proj_.emplace(name + ".temb_proj", temb_dim, out_ch);
    if (in_ch != out_ch) skip_.emplace(name + ".skip", in_ch, out_ch, 1, 1, 0);
}

void ResBlock::init_weights(Rng& rng) {
    conv1_.init_weights(rng);
    conv2_.init_weights(rng);
    if (temb_proj_) temb_proj_->init_weights(rng);
    if (skip_) skip_->init_weights(rng);
}

Tensor ResBlock::forward(const Tensor& x, const Tensor& temb) {
    Tensor h = conv1_.forward(act1_.forward(norm1_.forward(x)));
    if (temb_proj_) {
        require(temb.ndim() == 2 && temb.dim(1) == temb_dim_, Status::InvalidArgument,
                "resblock temb shape mismatch");
        Tensor t = temb_proj_->forward(temb_act_.forward(temb));  // (N, out_ch)
        const int n = h.dim(0), c = h.dim(1);
        const std::size_t plane = static_cast<std::size_t>(h.dim(2)) * h.dim(3);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < c; ++j) {
                real add = t[static_cast<std::size_t>(i) * c + j];
                real* p = h.data() + h.idx(i, j, 0, 0);
                for (std::size_t k = 0; k < plane; ++k) p[k] += add;
            }
    }
    h_shape_ = h.shape();
    Tensor out = conv2_.forward(act2_.forward(norm2_.forward(h)));
    out.add_(skip_ ? skip_->forward(x) : x);
    return out;
}

Tensor ResBlock::backward(const Tensor& gy, Tensor* gtemb) {
    Tensor gh = norm2_.backward(act2_.backward(conv2_.backward(gy)));
    if (temb_proj_) {
        // Channel-broadcast add: grad w.r.t. the embedding is the spatial sum.
        const int n = gh.dim(0), c = gh.dim(1);
        const std::size_t plane = static_cast<std::size_t>(gh.dim(2)) * gh.dim(3);
        Tensor gt({n, c});
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < c; ++j) {
                const real* p = gh.data() + gh.idx(i, j, 0, 0);
                real s = 0.0;
                for (std::size_t k = 0; k < plane; ++k) s += p[k];
                gt[static_cast<std::size_t>(i) * c + j] = s;
            }
        Tensor g = temb_act_.backward(temb_proj_->backward(gt));
        if (gtemb) gtemb->add_(g);
    }
    Tensor gx = norm1_.backward(act1_.backward(conv1_.backward(gh)));
    gx.add_(skip_ ? skip_->backward(gy) : gy);
    return gx;
}

void ResBlock::collect_params(std::vector<Param*>& out) {
    norm1_.collect_params(out);
    conv1_.collect_params(out);
    if (temb_proj_) temb_proj_->collect_params(out);
    norm2_.collect_params(out);
    conv2_.collect_params(out);
    if (skip_) skip_->collect_params(out);
}

}  // namespace bsldm::nn
