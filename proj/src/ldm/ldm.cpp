#include "ldm/ldm.hpp"

#include <algorithm>
#include <cmath>

namespace bsldm::ldm {

Tensor UNetPredictor::predict_noise(UNet& net, const Tensor& z_t,
                                    const std::vector<int>& steps, const Tensor& cond) {
    require(z_t.same_shape(cond), Status::InvalidArgument,
            "z_t/cond shape mismatch: " + z_t.shape_str() + " vs " + cond.shape_str());
    require(net.config().in_channels == 2 * z_t.dim(1), Status::InvalidArgument,
            "estimator input width must be twice the latent channel count");
    require(net.config().out_channels == z_t.dim(1), Status::InvalidArgument,
            "estimator output width must equal the latent channel count");
    return net.forward(concat_channels(z_t, cond), steps);
}

DiffusionBatch draw_diffusion_batch(const Tensor& z0, const NoiseSchedule& schedule,
                                    const OffsetNoiseConfig& offset, Rng& rng) {
    require(z0.ndim() == 4, Status::InvalidArgument, "latents must be NCHW");
    DiffusionBatch batch;
    batch.timesteps.resize(static_cast<std::size_t>(z0.dim(0)));
    for (auto& t : batch.timesteps) t = static_cast<int>(rng.uniform_int(schedule.T));
    batch.eps = sample_offset_noise(z0.shape(), offset.lambda, rng);
    batch.z_t = forward_noise(z0, batch.timesteps, schedule, batch.eps);
    return batch;
}

real diffusion_loss_given(NoisePredictor& pred, const DiffusionBatch& batch,
                          const Tensor& cond) {
    Tensor est = pred.predict(batch.z_t, batch.timesteps, cond);
    require(est.same_shape(batch.eps), Status::InvalidArgument,
            "noise estimate shape mismatch");
    real sum = 0.0;
    for (std::size_t i = 0; i < est.size(); ++i) {
        real d = est[i] - batch.eps[i];
        sum += d * d;
    }
    return sum / static_cast<real>(est.size());
}

real diffusion_loss(NoisePredictor& pred, const Tensor& z0, const Tensor& cond,
                    const NoiseSchedule& schedule, const OffsetNoiseConfig& offset,
                    std::uint64_t seed) {
    Rng rng(seed);
    DiffusionBatch batch = draw_diffusion_batch(z0, schedule, offset, rng);
    return diffusion_loss_given(pred, batch, cond);
}

real diffusion_loss_backward(UNet& net, const Tensor& z0, const Tensor& cond,
                             const NoiseSchedule& schedule, const OffsetNoiseConfig& offset,
                             Rng& rng) {
    DiffusionBatch batch = draw_diffusion_batch(z0, schedule, offset, rng);
    Tensor est = UNetPredictor::predict_noise(net, batch.z_t, batch.timesteps, cond);
    real sum = 0.0;
    Tensor gy = Tensor::zeros_like(est);
    const real scale = 2.0 / static_cast<real>(est.size());
    for (std::size_t i = 0; i < est.size(); ++i) {
        real d = est[i] - batch.eps[i];
        sum += d * d;
        gy[i] = scale * d;
    }
    net.backward(gy);
    return sum / static_cast<real>(est.size());
}

std::vector<real> train_ldm(UNet& net, nn::Adam& opt, nn::Ema& ema,
                            const std::vector<Tensor>& z0s, const std::vector<Tensor>& conds,
                            const NoiseSchedule& schedule, const OffsetNoiseConfig& offset,
                            const LdmTrainConfig& cfg, const EpochHook& hook) {
    require(!z0s.empty() && z0s.size() == conds.size(), Status::InvalidArgument,
            "latent corpus must be non-empty and index-aligned");
    require(cfg.batch_size >= 1, Status::InvalidArgument, "batch size must be >= 1");

    const int n = static_cast<int>(z0s.size());
    const real base_lr = opt.lr();
    std::vector<real> losses;

    for (int epoch = cfg.start_epoch; epoch < cfg.epochs; ++epoch) {
        real lr = base_lr;
        if (cfg.lr_step_epochs > 0)
            lr = base_lr * std::pow(cfg.lr_gamma, epoch / cfg.lr_step_epochs);
        opt.set_lr(lr);

        Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
        std::vector<int> order = shuffled_indices(n, rng);

        real epoch_sum = 0.0;
        int batches = 0;
        for (int start = 0; start < n; start += cfg.batch_size) {
            const int end = std::min(n, start + cfg.batch_size);
            std::vector<const Tensor*> zb, cb;
            for (int i = start; i < end; ++i) {
                zb.push_back(&z0s[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
                cb.push_back(&conds[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
            }
            Tensor z0 = stack_batch(zb);
            Tensor cond = stack_batch(cb);

            nn::zero_grads(opt.params());
            real loss = diffusion_loss_backward(net, z0, cond, schedule, offset, rng);
            if (!std::isfinite(loss))
                fail(Status::Numeric, "non-finite diffusion loss at epoch " +
                                          std::to_string(epoch) + ", batch " +
                                          std::to_string(batches));
            opt.step();
            ema.update(opt.params());
            epoch_sum += loss;
            ++batches;
        }
        const real mean_loss = epoch_sum / batches;
        losses.push_back(mean_loss);
        if (hook) hook(epoch, mean_loss, lr);
    }
    return losses;
}

}  // namespace bsldm::ldm
