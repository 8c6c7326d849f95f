#include "vq/vqgan.hpp"

#include <algorithm>
#include <cmath>

#include "nn/activations.hpp"
#include "nn/norm.hpp"

namespace bsldm::vq {

namespace {

int levels_for(int r) {
    require(r >= 1 && (r & (r - 1)) == 0, Status::InvalidArgument,
            "downsampling factor r must be a power of two");
    int levels = 1;
    while ((1 << (levels - 1)) < r) ++levels;
    return levels;  // log2(r) + 1
}

int mult_for(int level) { return std::min(1 << level, 4); }

real softplus(real x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

}  // namespace

VqGan::VqGan(const CompressorConfig& cfg)
    : cfg_(cfg),
      levels_(levels_for(cfg.r)),
      cb_(cfg.codebook_size, cfg.latent_channels) {
    const int base = cfg_.base_channels;
    const int groups = cfg_.norm_groups;

    // Encoder: conv stem, residual stages with stride-2 pooling between them,
    // then a tanh-bounded projection to C latent channels.
    int ch = base;
    enc_.add<nn::Conv2d>("enc.stem", 1, ch, 3, 1, 1);
    for (int l = 0; l < levels_; ++l) {
        const int out_ch = base * mult_for(l);
        for (int b = 0; b < cfg_.num_res_blocks; ++b) {
            enc_.add<nn::ResBlockLayer>("enc.l" + std::to_string(l) + ".res" + std::to_string(b),
                                        ch, out_ch, groups);
            ch = out_ch;
        }
        if (l != levels_ - 1) {
            enc_.add<nn::Conv2d>("enc.l" + std::to_string(l) + ".pool", ch, ch, 3, 2, 1);
        }
    }
    enc_.add<nn::GroupNorm>("enc.norm_out", ch, groups);
    enc_.add<nn::Silu>();
    enc_.add<nn::Conv2d>("enc.proj", ch, cfg_.latent_channels, 3, 1, 1);
    enc_.add<nn::TanhLayer>();

    // Decoder mirrors the encoder.
    int dch = base * mult_for(levels_ - 1);
    dec_.add<nn::Conv2d>("dec.stem", cfg_.latent_channels, dch, 3, 1, 1);
    for (int l = levels_ - 1; l >= 0; --l) {
        const int out_ch = base * mult_for(l);
        for (int b = 0; b < cfg_.num_res_blocks; ++b) {
            dec_.add<nn::ResBlockLayer>("dec.l" + std::to_string(l) + ".res" + std::to_string(b),
                                        dch, out_ch, groups);
            dch = out_ch;
        }
        if (l != 0) {
            dec_.add<nn::Upsample2x>();
            dec_.add<nn::Conv2d>("dec.l" + std::to_string(l) + ".up", dch, dch, 3, 1, 1);
        }
    }
    dec_.add<nn::GroupNorm>("dec.norm_out", dch, groups);
    dec_.add<nn::Silu>();
    dec_.add<nn::Conv2d>("dec.proj", dch, 1, 3, 1, 1);
    dec_.add<nn::TanhLayer>();

    // Patch discriminator: stride-2 k4 stack emitting a logit map.
    const int ndf = cfg_.disc_base_channels;
    disc_.add<nn::Conv2d>("disc.c1", 1, ndf, 4, 2, 1);
    disc_.add<nn::LeakyRelu>(0.2);
    disc_.add<nn::Conv2d>("disc.c2", ndf, 2 * ndf, 4, 2, 1);
    disc_.add<nn::GroupNorm>("disc.n2", 2 * ndf, groups);
    disc_.add<nn::LeakyRelu>(0.2);
    disc_.add<nn::Conv2d>("disc.c3", 2 * ndf, 4 * ndf, 4, 1, 1);
    disc_.add<nn::GroupNorm>("disc.n3", 4 * ndf, groups);
    disc_.add<nn::LeakyRelu>(0.2);
    disc_.add<nn::Conv2d>("disc.out", 4 * ndf, 1, 4, 1, 1);
}

void VqGan::init_weights(Rng& rng) {
    enc_.init_weights(rng);
    dec_.init_weights(rng);
    cb_.init_weights(rng);
    disc_.init_weights(rng);
}

Tensor VqGan::encode(const Tensor& x) {
    require(x.ndim() == 4 && x.dim(1) == 1, Status::InvalidArgument,
            "encode expects (N,1,H,W) input");
    require(x.dim(2) % cfg_.r == 0 && x.dim(3) % cfg_.r == 0, Status::InvalidArgument,
            "image dimensions must be divisible by r=" + std::to_string(cfg_.r));
    Tensor z = enc_.forward(x);
    require(z.dim(2) == x.dim(2) / cfg_.r && z.dim(3) == x.dim(3) / cfg_.r, Status::Internal,
            "encoder produced unexpected latent size");
    return z;
}

Tensor VqGan::decode(const Tensor& z_q) {
    require(z_q.ndim() == 4 && z_q.dim(1) == cfg_.latent_channels, Status::InvalidArgument,
            "decode expects (N,C,h,w) latents with C=" + std::to_string(cfg_.latent_channels));
    return dec_.forward(z_q);
}

std::vector<Param*>& VqGan::gen_params() {
    if (gen_cache_.empty()) {
        enc_.collect_params(gen_cache_);
        dec_.collect_params(gen_cache_);
        gen_cache_.push_back(&cb_.codes);
    }
    return gen_cache_;
}

std::vector<Param*>& VqGan::disc_params() {
    if (disc_cache_.empty()) disc_.collect_params(disc_cache_);
    return disc_cache_;
}

ReconLossReport hybrid_loss(const Tensor& x, const Tensor& x_hat, const Tensor& disc_score,
                            real codebook_term, real commit_term,
                            metrics::FeatureExtractor& fe, const CompressorConfig& cfg) {
    require(x.same_shape(x_hat), Status::InvalidArgument, "hybrid_loss image shape mismatch");
    ReconLossReport rep;

    real l1 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) l1 += std::abs(x[i] - x_hat[i]);
    rep.l1 = l1 / static_cast<real>(x.size());

    rep.perceptual = metrics::feature_distance(fe, x_hat, x);

    if (!disc_score.empty()) {
        real adv = 0.0;
        for (std::size_t i = 0; i < disc_score.size(); ++i) {
            const real s = disc_score[i];
            require(s > 0.0 && s < 1.0, Status::Numeric,
                    "discriminator score outside (0,1)");
            adv -= std::log(s);
        }
        rep.adversarial = adv / static_cast<real>(disc_score.size());
    }

    rep.quantization = codebook_term + cfg.beta_commit * commit_term;
    rep.total = cfg.lambda_l1 * rep.l1 + cfg.lambda_per * rep.perceptual +
                cfg.lambda_adv * rep.adversarial + cfg.lambda_qua * rep.quantization;
    return rep;
}

std::vector<VqEpochStats> train_vqgan(VqGan& model, nn::Adam& gen_opt, nn::Adam& disc_opt,
                                      const std::vector<Tensor>& images,
                                      metrics::FeatureExtractor& fe, const VqTrainConfig& cfg,
                                      const VqEpochHook& hook) {
    require(!images.empty(), Status::InvalidArgument, "training corpus is empty");
    require(cfg.batch_size >= 1, Status::InvalidArgument, "batch size must be >= 1");

    const int n = static_cast<int>(images.size());
    const int batches_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
    const real base_lr_gen = gen_opt.lr();
    const real base_lr_disc = disc_opt.lr();
    const CompressorConfig& mc = model.config();

    std::vector<VqEpochStats> log;
    std::vector<char> code_used(static_cast<std::size_t>(model.codebook().K()));

    for (int epoch = cfg.start_epoch; epoch < cfg.epochs; ++epoch) {
        real decay = 1.0;
        if (cfg.lr_step_epochs > 0) decay = std::pow(cfg.lr_gamma, epoch / cfg.lr_step_epochs);
        gen_opt.set_lr(base_lr_gen * decay);
        disc_opt.set_lr(base_lr_disc * decay);

        Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
        std::vector<int> order = shuffled_indices(n, rng);
        std::fill(code_used.begin(), code_used.end(), 0);

        VqEpochStats stats;
        int batch_idx = 0;
        for (int start = 0; start < n; start += cfg.batch_size, ++batch_idx) {
            const int end = std::min(n, start + cfg.batch_size);
            std::vector<const Tensor*> items;
            for (int i = start; i < end; ++i)
                items.push_back(&images[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
            Tensor x = stack_batch(items);

            const long global_step =
                static_cast<long>(epoch) * batches_per_epoch + batch_idx;
            const bool adv_active = global_step >= cfg.disc_warmup_steps;

            // generator pass
            Tensor z = model.encode(x);
            QuantizeResult q = model.quantize_latent(z);
            for (int idx : q.indices) code_used[static_cast<std::size_t>(idx)] = 1;
            Tensor x_hat = model.decode(q.z_q);

            Tensor score;
            Tensor logits;
            if (adv_active) {
                logits = model.discriminator().forward(x_hat);
                score = Tensor::zeros_like(logits);
                for (std::size_t i = 0; i < logits.size(); ++i)
                    score[i] = std::clamp(nn::sigmoid(logits[i]), 1e-12, 1.0 - 1e-12);
            }
            ReconLossReport rep =
                hybrid_loss(x, x_hat, score, q.codebook_term, q.commit_term, fe, mc);
            if (!std::isfinite(rep.total))
                fail(Status::Numeric, "non-finite compressor loss at epoch " +
                                          std::to_string(epoch) + ", batch " +
                                          std::to_string(batch_idx));

            nn::zero_grads(gen_opt.params());
            Tensor gx_hat = Tensor::zeros_like(x_hat);
            const real inv_px = 1.0 / static_cast<real>(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) {
                const real d = x_hat[i] - x[i];
                gx_hat[i] = mc.lambda_l1 * inv_px * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0));
            }
            Tensor gper;
            metrics::feature_distance_grad(fe, x_hat, x, gper);
            gx_hat.add_scaled_(gper, mc.lambda_per);
            if (adv_active) {
                // d/dlogit of -mean log sigmoid(logit)
                Tensor gl = Tensor::zeros_like(logits);
                const real inv_patch = 1.0 / static_cast<real>(logits.size());
                for (std::size_t i = 0; i < logits.size(); ++i)
                    gl[i] = -mc.lambda_adv * inv_patch * (1.0 - nn::sigmoid(logits[i]));
                gx_hat.add_(model.discriminator().backward(gl));
            }
            Tensor g_zq = model.decoder_backward(gx_hat);
            Tensor gz;
            accumulate_quantize_grads(z, q, g_zq, mc.lambda_qua,
                                      mc.lambda_qua * mc.beta_commit, gz,
                                      model.codebook().codes.grad);
            model.encoder_backward(gz);
            gen_opt.step();

            // discriminator pass on the same batch
            real disc_loss = 0.0;
            if (adv_active) {
                nn::zero_grads(disc_opt.params());
                Tensor lr_logits = model.discriminator().forward(x);
                const real inv_p = 1.0 / static_cast<real>(lr_logits.size());
                Tensor gl = Tensor::zeros_like(lr_logits);
                for (std::size_t i = 0; i < lr_logits.size(); ++i) {
                    disc_loss += inv_p * softplus(-lr_logits[i]);
                    gl[i] = -inv_p * (1.0 - nn::sigmoid(lr_logits[i]));
                }
                model.discriminator().backward(gl);
                Tensor lf_logits = model.discriminator().forward(x_hat);
                for (std::size_t i = 0; i < lf_logits.size(); ++i) {
                    disc_loss += inv_p * softplus(lf_logits[i]);
                    gl[i] = inv_p * nn::sigmoid(lf_logits[i]);
                }
                model.discriminator().backward(gl);
                if (!std::isfinite(disc_loss))
                    fail(Status::Numeric, "non-finite discriminator loss at epoch " +
                                              std::to_string(epoch));
                disc_opt.step();
            }

            stats.l1 += rep.l1;
            stats.perceptual += rep.perceptual;
            stats.adversarial += rep.adversarial;
            stats.quantization += rep.quantization;
            stats.total += rep.total;
            stats.disc_loss += disc_loss;
        }

        const real inv_b = 1.0 / batches_per_epoch;
        stats.l1 *= inv_b;
        stats.perceptual *= inv_b;
        stats.adversarial *= inv_b;
        stats.quantization *= inv_b;
        stats.total *= inv_b;
        stats.disc_loss *= inv_b;
        int used = 0;
        for (char u : code_used) used += u;
        stats.codebook_usage = static_cast<real>(used) / static_cast<real>(code_used.size());

        log.push_back(stats);
        if (hook) hook(epoch, stats);
    }
    return log;
}

}  // namespace bsldm::vq
