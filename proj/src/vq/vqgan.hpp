#pragma once

#include <cstdint>
#include <functional>

#include "metrics/features.hpp"
#include "nn/adam.hpp"
#include "nn/resblock.hpp"
#include "nn/sequential.hpp"
#include "nn/updown.hpp"
#include "vq/codebook.hpp"

namespace bsldm::vq {

struct CompressorConfig {
    int r = 8;                // power-of-two spatial downsampling
    int latent_channels = 3;  // C; also the code dimensionality d
    int codebook_size = 1024;
    int base_channels = 32;
    int num_res_blocks = 1;
    int norm_groups = 8;
    int disc_base_channels = 16;
    real lambda_l1 = 1.0;
    real lambda_per = 0.001;
    real lambda_adv = 0.01;
    real lambda_qua = 1.0;
    real beta_commit = 0.25;
};

struct ReconLossReport {
    real l1 = 0.0;
    real perceptual = 0.0;
    real adversarial = 0.0;
    real quantization = 0.0;
    real total = 0.0;
};

// Encoder E, codebook Z, decoder G, and patch discriminator D, sharing one
// instance across the CXR and soft-tissue domains. Latents and reconstructions
// are tanh-bounded to (-1,1).
class VqGan {
public:
    explicit VqGan(const CompressorConfig& cfg);

    void init_weights(Rng& rng);

    // x: (N,1,H,W) in [-1,1], H and W divisible by r -> (N,C,H/r,W/r)
    Tensor encode(const Tensor& x);
    // z_q: (N,C,h,w) -> (N,1,h*r,w*r) in (-1,1)
    Tensor decode(const Tensor& z_q);
    QuantizeResult quantize_latent(const Tensor& z) const { return quantize(z, cb_); }

    Tensor encoder_backward(const Tensor& gz) { return enc_.backward(gz); }
    Tensor decoder_backward(const Tensor& gx_hat) { return dec_.backward(gx_hat); }

    Codebook& codebook() { return cb_; }
    const Codebook& codebook() const { return cb_; }
    nn::Sequential& discriminator() { return disc_; }

    std::vector<Param*>& gen_params();   // encoder + decoder + codebook
    std::vector<Param*>& disc_params();
    const CompressorConfig& config() const { return cfg_; }
    int levels() const { return levels_; }

private:
    CompressorConfig cfg_;
    int levels_;
    nn::Sequential enc_, dec_, disc_;
    Codebook cb_;
    std::vector<Param*> gen_cache_, disc_cache_;
};

// Loss assembly. disc_score holds per-patch probabilities in (0,1); an empty
// tensor means the adversarial term is inactive (warm-up) and contributes 0.
ReconLossReport hybrid_loss(const Tensor& x, const Tensor& x_hat, const Tensor& disc_score,
                            real codebook_term, real commit_term,
                            metrics::FeatureExtractor& fe, const CompressorConfig& cfg);

struct VqTrainConfig {
    int epochs = 1000;
    int start_epoch = 0;
    int batch_size = 4;
    int lr_step_epochs = 0;  // halve generator/discriminator lr every N epochs; 0 = constant
    real lr_gamma = 0.5;
    int disc_warmup_steps = 10000;  // generator steps before the adversarial game starts
    std::uint64_t seed = 0;
};

struct VqEpochStats {
    real l1 = 0.0, perceptual = 0.0, adversarial = 0.0, quantization = 0.0, total = 0.0;
    real disc_loss = 0.0;
    real codebook_usage = 0.0;  // fraction of codes selected at least once this epoch
};

using VqEpochHook = std::function<void(int, const VqEpochStats&)>;

// Alternating generator/discriminator optimization over a mixed corpus of
// CXR and soft-tissue images. Aborts on non-finite loss.
std::vector<VqEpochStats> train_vqgan(VqGan& model, nn::Adam& gen_opt, nn::Adam& disc_opt,
                                      const std::vector<Tensor>& images,
                                      metrics::FeatureExtractor& fe, const VqTrainConfig& cfg,
                                      const VqEpochHook& hook);

}  // namespace bsldm::vq
