#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "diffusion/schedule.hpp"
#include "ldm/unet.hpp"
#include "nn/adam.hpp"
#include "nn/ema.hpp"

namespace bsldm::ldm {

// Prediction interface so tests can swap the trained estimator for
// closed-form oracles when checking the loss plumbing.
class NoisePredictor {
public:
    virtual ~NoisePredictor() = default;
    virtual Tensor predict(const Tensor& z_t, const std::vector<int>& steps,
                           const Tensor& cond) = 0;
};

class UNetPredictor : public NoisePredictor {
public:
    explicit UNetPredictor(UNet& net) : net_(net) {}
    Tensor predict(const Tensor& z_t, const std::vector<int>& steps,
                   const Tensor& cond) override {
        return predict_noise(net_, z_t, steps, cond);
    }

    // Conditional estimate via channel concatenation of z_t and the condition
    // latent; the estimator input width must be exactly twice the latent width.
    static Tensor predict_noise(UNet& net, const Tensor& z_t, const std::vector<int>& steps,
                                const Tensor& cond);

private:
    UNet& net_;
};

inline Tensor predict_noise(UNet& net, const Tensor& z_t, const std::vector<int>& steps,
                            const Tensor& cond) {
    return UNetPredictor::predict_noise(net, z_t, steps, cond);
}

// One training draw: per-sample uniform timesteps, offset noise, and the
// noised latents built from them.
struct DiffusionBatch {
    std::vector<int> timesteps;
    Tensor eps;
    Tensor z_t;
};

DiffusionBatch draw_diffusion_batch(const Tensor& z0, const NoiseSchedule& schedule,
                                    const OffsetNoiseConfig& offset, Rng& rng);

// Mean squared error between the predicted and true noise over all elements.
real diffusion_loss_given(NoisePredictor& pred, const DiffusionBatch& batch, const Tensor& cond);

// Draws the batch from the seed, then scores it. Same seed, same loss.
real diffusion_loss(NoisePredictor& pred, const Tensor& z0, const Tensor& cond,
                    const NoiseSchedule& schedule, const OffsetNoiseConfig& offset,
                    std::uint64_t seed);

// Forward + backward through the U-Net for one drawn batch; accumulates
// parameter gradients and returns the loss. Uses the same draw as
// diffusion_loss for the same rng state, which is what the finite-difference
// gradient check relies on.
real diffusion_loss_backward(UNet& net, const Tensor& z0, const Tensor& cond,
                             const NoiseSchedule& schedule, const OffsetNoiseConfig& offset,
                             Rng& rng);

struct LdmTrainConfig {
    int epochs = 2500;
    int start_epoch = 0;  // resume support
    int batch_size = 4;
    real ema_decay = 0.995;
    int lr_step_epochs = 0;  // halve lr every this many epochs; 0 = constant
    real lr_gamma = 0.5;
    std::uint64_t seed = 0;
};

// Called after each epoch with the epoch index, mean loss, and current lr.
using EpochHook = std::function<void(int, real, real)>;

// Frozen-compressor training loop over precomputed latent pairs. z0s are the
// soft-tissue latents, conds the CXR latents, index-aligned. Aborts on
// non-finite loss. Returns per-epoch mean losses.
std::vector<real> train_ldm(UNet& net, nn::Adam& opt, nn::Ema& ema,
                            const std::vector<Tensor>& z0s, const std::vector<Tensor>& conds,
                            const NoiseSchedule& schedule, const OffsetNoiseConfig& offset,
                            const LdmTrainConfig& cfg, const EpochHook& hook);

}  // namespace bsldm::ldm
