#pragma once

#include <memory>
#include <vector>

#include "nn/attention.hpp"
#include "nn/conv2d.hpp"
#include "nn/linear.hpp"
#include "nn/norm.hpp"
#include "nn/resblock.hpp"
#include "nn/updown.hpp"

namespace bsldm::ldm {

using nn::Param;

struct UNetConfig {
    int in_channels = 6;  // z_t concatenated with the condition latent
    int out_channels = 3;
    int base_channels = 64;
    std::vector<int> channel_mults = {1, 2, 4};
    std::vector<int> attention_resolutions = {16, 8};  // latent sizes that get attention
    int num_res_blocks = 1;
    int norm_groups = 8;
    int temb_dim = 128;
    int latent_size = 32;  // spatial size of the latents fed to forward()
};

// Noise estimator: U-Net over latents. Timestep embeddings are injected into
// every residual block; self-attention sits at the configured resolutions and
// in the bottleneck when the coarsest resolution is listed.
class UNet {
public:
    explicit UNet(UNetConfig cfg);

    void init_weights(Rng& rng);

    // x: (N, in_channels, S, S) with S = cfg.latent_size; one timestep per sample.
    Tensor forward(const Tensor& x, const std::vector<int>& steps);
    // Accumulates parameter gradients; returns grad w.r.t. x.
    Tensor backward(const Tensor& gy);

    void collect_params(std::vector<Param*>& out);
    std::vector<Param*>& params();  // collected once, cached
    std::size_t param_count();
    const UNetConfig& config() const { return cfg_; }

private:
    struct Block {
        std::unique_ptr<nn::ResBlock> res;
        std::unique_ptr<nn::SelfAttention2d> attn;  // null when level has no attention
    };
    // What produced each entry on the skip stack, so backward can route the
    // stored skip gradients back through the right layer.
    struct Producer {
        enum Kind { ConvIn, ResAttn, Down } kind;
        int level = 0, block = 0;
    };
    struct UpMeta {
        int skip_index, h_ch, skip_ch;
    };

    bool attn_at(int level) const;

    UNetConfig cfg_;
    nn::Linear temb_fc1_, temb_fc2_;
    nn::Silu temb_act_;
    nn::Conv2d conv_in_;
    std::vector<std::vector<Block>> down_;
    std::vector<std::unique_ptr<nn::Conv2d>> downsample_;  // per level except coarsest
    std::unique_ptr<nn::ResBlock> mid1_, mid2_;
    std::unique_ptr<nn::SelfAttention2d> mid_attn_;
    std::vector<std::vector<Block>> up_;  // per level: num_res_blocks + 1 blocks
    std::vector<std::unique_ptr<nn::Upsample2x>> up_nn_;   // per level except finest
    std::vector<std::unique_ptr<nn::Conv2d>> up_conv_;
    nn::GroupNorm norm_out_;
    nn::Silu act_out_;
    nn::Conv2d conv_out_;

    std::vector<Producer> producers_;  // static skip-stack layout

    // per-forward caches
    Tensor temb_;
    std::vector<Tensor> skips_;
    std::vector<Tensor> skip_grads_;
    std::vector<UpMeta> up_meta_;

    std::vector<Param*> params_cache_;
};

}  // namespace bsldm::ldm
