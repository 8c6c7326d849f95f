#include "ldm/unet.hpp"

#include <algorithm>
#include <string>

#include "nn/embedding.hpp"

namespace bsldm::ldm {

namespace {
std::string tag(const char* stem, int l) { return std::string(stem) + std::to_string(l); }
std::string tag(const char* stem, int l, const char* part, int b) {
    return std::string(stem) + std::to_string(l) + "." + part + std::to_string(b);
}
}  // namespace

bool UNet::attn_at(int level) const {
    const int size = cfg_.latent_size >> level;
    return std::find(cfg_.attention_resolutions.begin(), cfg_.attention_resolutions.end(),
                     size) != cfg_.attention_resolutions.end();
}

UNet::UNet(UNetConfig cfg)
    : cfg_(std::move(cfg)),
      temb_fc1_("temb.fc1", cfg_.temb_dim, cfg_.temb_dim),
      temb_fc2_("temb.fc2", cfg_.temb_dim, cfg_.temb_dim),
      conv_in_("conv_in", cfg_.in_channels, cfg_.base_channels, 3, 1, 1),
      norm_out_("norm_out", cfg_.base_channels * cfg_.channel_mults.front(), cfg_.norm_groups),
      conv_out_("conv_out", cfg_.base_channels * cfg_.channel_mults.front(), cfg_.out_channels,
                3, 1, 1) {
    const int levels = static_cast<int>(cfg_.channel_mults.size());
    require(levels >= 1, Status::InvalidArgument, "unet needs at least one level");
    require(cfg_.num_res_blocks >= 1, Status::InvalidArgument, "unet needs res blocks");
    const int down_factor = 1 << (levels - 1);
    require(cfg_.latent_size >= down_factor && cfg_.latent_size % down_factor == 0,
            Status::InvalidArgument, "latent size not divisible across unet levels");

    int ch = cfg_.base_channels;
    std::vector<int> skip_ch = {ch};
    producers_.push_back({Producer::ConvIn, 0, 0});

    down_.resize(levels);
    downsample_.resize(levels);
    for (int l = 0; l < levels; ++l) {
        const int out_ch = cfg_.base_channels * cfg_.channel_mults[l];
        for (int b = 0; b < cfg_.num_res_blocks; ++b) {
            Block blk;
            blk.res = std::make_unique<nn::ResBlock>(tag("down", l, "res", b), ch, out_ch,
                                                     cfg_.temb_dim, cfg_.norm_groups);
            if (attn_at(l))
                blk.attn = std::make_unique<nn::SelfAttention2d>(tag("down", l, "attn", b),
                                                                 out_ch, cfg_.norm_groups);
            down_[l].push_back(std::move(blk));
            ch = out_ch;
            skip_ch.push_back(ch);
            producers_.push_back({Producer::ResAttn, l, b});
        }
        if (l != levels - 1) {
            downsample_[l] =
                std::make_unique<nn::Conv2d>(tag("down", l) + ".pool", ch, ch, 3, 2, 1);
            skip_ch.push_back(ch);
            producers_.push_back({Producer::Down, l, 0});
        }
    }

    mid1_ = std::make_unique<nn::ResBlock>("mid.res1", ch, ch, cfg_.temb_dim, cfg_.norm_groups);
    if (attn_at(levels - 1))
        mid_attn_ = std::make_unique<nn::SelfAttention2d>("mid.attn", ch, cfg_.norm_groups);
    mid2_ = std::make_unique<nn::ResBlock>("mid.res2", ch, ch, cfg_.temb_dim, cfg_.norm_groups);

    up_.resize(levels);
    up_nn_.resize(levels);
    up_conv_.resize(levels);
    for (int l = levels - 1; l >= 0; --l) {
        const int out_ch = cfg_.base_channels * cfg_.channel_mults[l];
        for (int b = 0; b <= cfg_.num_res_blocks; ++b) {
            require(!skip_ch.empty(), Status::Internal, "skip stack underflow");
            const int sc = skip_ch.back();
            skip_ch.pop_back();
            Block blk;
            blk.res = std::make_unique<nn::ResBlock>(tag("up", l, "res", b), ch + sc, out_ch,
                                                     cfg_.temb_dim, cfg_.norm_groups);
            if (attn_at(l))
                blk.attn = std::make_unique<nn::SelfAttention2d>(tag("up", l, "attn", b),
                                                                 out_ch, cfg_.norm_groups);
            up_[l].push_back(std::move(blk));
            ch = out_ch;
        }
        if (l != 0) {
            up_nn_[l] = std::make_unique<nn::Upsample2x>();
            up_conv_[l] = std::make_unique<nn::Conv2d>(tag("up", l) + ".conv", ch, ch, 3, 1, 1);
        }
    }
    require(skip_ch.empty(), Status::Internal, "skip stack not fully consumed");
}

void UNet::init_weights(Rng& rng) {
    temb_fc1_.init_weights(rng);
    temb_fc2_.init_weights(rng);
    conv_in_.init_weights(rng);
    const int levels = static_cast<int>(down_.size());
    for (int l = 0; l < levels; ++l) {
        for (auto& blk : down_[l]) {
            blk.res->init_weights(rng);
            if (blk.attn) blk.attn->init_weights(rng);
        }
        if (downsample_[l]) downsample_[l]->init_weights(rng);
    }
    mid1_->init_weights(rng);
    if (mid_attn_) mid_attn_->init_weights(rng);
    mid2_->init_weights(rng);
    for (int l = levels - 1; l >= 0; --l) {
        for (auto& blk : up_[l]) {
            blk.res->init_weights(rng);
            if (blk.attn) blk.attn->init_weights(rng);
        }
        if (up_conv_[l]) up_conv_[l]->init_weights(rng);
    }
    conv_out_.init_weights(rng);
    // Zero-init the output head so the estimator starts at the identity of
    // the residual structure; gradients restore it in the first steps.
    conv_out_.weight.value.fill(0.0);
    conv_out_.bias.value.fill(0.0);
}

Tensor UNet::forward(const Tensor& x, const std::vector<int>& steps) {
    require(x.ndim() == 4 && x.dim(1) == cfg_.in_channels, Status::InvalidArgument,
            "unet input shape mismatch: " + x.shape_str());
    require(x.dim(2) == cfg_.latent_size && x.dim(3) == cfg_.latent_size,
            Status::InvalidArgument, "unet input spatial size mismatch");
    require(static_cast<int>(steps.size()) == x.dim(0), Status::InvalidArgument,
            "one timestep per sample required");

    temb_ = temb_fc2_.forward(temb_act_.forward(
        temb_fc1_.forward(nn::sinusoidal_embedding(steps, cfg_.temb_dim))));

    skips_.clear();
    up_meta_.clear();
    const int levels = static_cast<int>(down_.size());

    Tensor h = conv_in_.forward(x);
    skips_.push_back(h);
    for (int l = 0; l < levels; ++l) {
        for (auto& blk : down_[l]) {
            h = blk.res->forward(h, temb_);
            if (blk.attn) h = blk.attn->forward(h);
            skips_.push_back(h);
        }
        if (l != levels - 1) {
            h = downsample_[l]->forward(h);
            skips_.push_back(h);
        }
    }

    h = mid1_->forward(h, temb_);
    if (mid_attn_) h = mid_attn_->forward(h);
    h = mid2_->forward(h, temb_);

    int top = static_cast<int>(skips_.size());
    for (int l = levels - 1; l >= 0; --l) {
        for (auto& blk : up_[l]) {
            --top;
            require(top >= 0, Status::Internal, "skip stack underflow in forward");
            const int hc = h.dim(1);
            up_meta_.push_back({top, hc, skips_[top].dim(1)});
            h = blk.res->forward(concat_channels(h, skips_[top]), temb_);
            if (blk.attn) h = blk.attn->forward(h);
        }
        if (l != 0) h = up_conv_[l]->forward(up_nn_[l]->forward(h));
    }
    require(top == 0, Status::Internal, "skip stack not fully consumed in forward");

    return conv_out_.forward(act_out_.forward(norm_out_.forward(h)));
}

Tensor UNet::backward(const Tensor& gy) {
    const int levels = static_cast<int>(down_.size());
    Tensor gtemb = Tensor::zeros_like(temb_);
    Tensor g = norm_out_.backward(act_out_.backward(conv_out_.backward(gy)));

    skip_grads_.assign(skips_.size(), Tensor());
    std::size_t meta = up_meta_.size();
    for (int l = 0; l < levels; ++l) {
        if (l != 0) g = up_nn_[l]->backward(up_conv_[l]->backward(g));
        for (int b = static_cast<int>(up_[l].size()) - 1; b >= 0; --b) {
            auto& blk = up_[l][b];
            if (blk.attn) g = blk.attn->backward(g);
            Tensor gcat = blk.res->backward(g, &gtemb);
            require(meta > 0, Status::Internal, "up meta underflow");
            const UpMeta& m = up_meta_[--meta];
            Tensor gh, gskip;
            split_channels(gcat, m.h_ch, gh, gskip);
            skip_grads_[m.skip_index] = std::move(gskip);
            g = std::move(gh);
        }
    }
    require(meta == 0, Status::Internal, "up meta not fully consumed");

    g = mid2_->backward(g, &gtemb);
    if (mid_attn_) g = mid_attn_->backward(g);
    g = mid1_->backward(g, &gtemb);

    for (int p = static_cast<int>(skips_.size()) - 1; p >= 0; --p) {
        require(!skip_grads_[p].empty(), Status::Internal, "skip gradient never produced");
        g.add_(skip_grads_[p]);
        const Producer& pr = producers_[p];
        switch (pr.kind) {
            case Producer::Down:
                g = downsample_[pr.level]->backward(g);
                break;
            case Producer::ResAttn: {
                auto& blk = down_[pr.level][pr.block];
                if (blk.attn) g = blk.attn->backward(g);
                g = blk.res->backward(g, &gtemb);
                break;
            }
            case Producer::ConvIn:
                g = conv_in_.backward(g);
                break;
        }
    }

    temb_fc1_.backward(temb_act_.backward(temb_fc2_.backward(gtemb)));
    return g;
}

void UNet::collect_params(std::vector<Param*>& out) {
    temb_fc1_.collect_params(out);
    temb_fc2_.collect_params(out);
    conv_in_.collect_params(out);
    const int levels = static_cast<int>(down_.size());
    for (int l = 0; l < levels; ++l) {
        for (auto& blk : down_[l]) {
            blk.res->collect_params(out);
            if (blk.attn) blk.attn->collect_params(out);
        }
        if (downsample_[l]) downsample_[l]->collect_params(out);
    }
    mid1_->collect_params(out);
    if (mid_attn_) mid_attn_->collect_params(out);
    mid2_->collect_params(out);
    for (int l = levels - 1; l >= 0; --l) {
        for (auto& blk : up_[l]) {
            blk.res->collect_params(out);
            if (blk.attn) blk.attn->collect_params(out);
        }
        if (up_conv_[l]) up_conv_[l]->collect_params(out);
    }
    norm_out_.collect_params(out);
    conv_out_.collect_params(out);
}

std::vector<Param*>& UNet::params() {
    if (params_cache_.empty()) collect_params(params_cache_);
    return params_cache_;
}

std::size_t UNet::param_count() {
    return nn::param_count(params());
}

}  // namespace bsldm::ldm
