#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "core/error.hpp"
#include "core/rng.hpp"
#include "ldm/ldm.hpp"

using namespace bsldm;
using namespace bsldm::ldm;

namespace {

Tensor randn(const std::vector<int>& shape, Rng& rng) {
    Tensor t(shape);
    rng.normal_fill(t.data(), t.size());
    return t;
}

UNetConfig tiny_cfg(int latent_channels, int latent_size) {
    UNetConfig cfg;
    cfg.in_channels = 2 * latent_channels;
    cfg.out_channels = latent_channels;
    cfg.base_channels = 4;
    cfg.channel_mults = {1, 2};
    cfg.attention_resolutions = {latent_size / 2};
    cfg.num_res_blocks = 1;
    cfg.norm_groups = 2;
    cfg.temb_dim = 8;
    cfg.latent_size = latent_size;
    return cfg;
}

void randomize_params(UNet& net, Rng& rng) {
    for (auto* p : net.params())
        for (std::int64_t i = 0; i < p->value.size(); ++i) p->value[i] = 0.25 * rng.normal();
}

struct CannedPredictor final : NoisePredictor {
    Tensor canned;
    Tensor predict(const Tensor& z_t, const std::vector<int>&, const Tensor&) override {
        return canned.empty() ? Tensor(z_t.shape()) : canned;
    }
};

}  // namespace

TEST_CASE("predict_noise concatenates condition channels and keeps shape") {
    auto cfg = tiny_cfg(1, 4);
    UNet net(cfg);
    Rng rng(5);
    net.init_weights(rng);
    randomize_params(net, rng);

    const Tensor z = randn({2, 1, 4, 4}, rng);
    const Tensor cond = randn({2, 1, 4, 4}, rng);
    const Tensor out = predict_noise(net, z, {0, 3}, cond);
    REQUIRE(out.same_shape(z));

    SUBCASE("deterministic") {
        const Tensor again = predict_noise(net, z, {0, 3}, cond);
        CHECK(std::memcmp(out.data(), again.data(),
                          static_cast<size_t>(out.size()) * sizeof(real)) == 0);
    }
    SUBCASE("condition matters") {
        const Tensor other = predict_noise(net, z, {0, 3}, z);
        bool differs = false;
        for (std::int64_t i = 0; i < out.size(); ++i) differs = differs || out[i] != other[i];
        CHECK(differs);
    }
    SUBCASE("shape mismatch rejected") {
        Tensor narrow({2, 1, 2, 2});
        CHECK_THROWS_AS(predict_noise(net, z, {0, 3}, narrow), Error);
    }
    SUBCASE("estimator width must be twice the latent width") {
        auto wide = tiny_cfg(2, 4);  // expects 2-channel latents
        UNet net2(wide);
        net2.init_weights(rng);
        CHECK_THROWS_AS(predict_noise(net2, z, {0, 3}, cond), Error);
    }
}

TEST_CASE("diffusion loss is zero for an oracle and mean-square for a zero predictor") {
    const auto sched = make_cosine_schedule(30, 0.008, 0.02);
    const OffsetNoiseConfig off{0.1};
    Rng rng(21);
    const Tensor z0 = randn({8, 2, 4, 4}, rng);
    const Tensor cond = randn({8, 2, 4, 4}, rng);

    Rng draw_rng(555);
    const auto batch = draw_diffusion_batch(z0, sched, off, draw_rng);

    CannedPredictor oracle;
    oracle.canned = batch.eps;
    CHECK(diffusion_loss_given(oracle, batch, cond) == 0.0);

    CannedPredictor zero;
    real want = 0.0;
    for (std::int64_t i = 0; i < batch.eps.size(); ++i) want += batch.eps[i] * batch.eps[i];
    want /= static_cast<real>(batch.eps.size());
    CHECK(diffusion_loss_given(zero, batch, cond) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("zero predictor loss approaches 1 + lambda over many draws") {
    const auto sched = make_cosine_schedule(20, 0.008, 0.02);
    const OffsetNoiseConfig off{0.1};
    Rng rng(2);
    const Tensor z0 = randn({16, 3, 8, 8}, rng);
    const Tensor cond = randn({16, 3, 8, 8}, rng);
    CannedPredictor zero;
    real acc = 0.0;
    const int draws = 40;
    for (int i = 0; i < draws; ++i)
        acc += diffusion_loss(zero, z0, cond, sched, off, 1000 + static_cast<std::uint64_t>(i));
    CHECK(acc / draws == doctest::Approx(1.1).epsilon(0.03));
}

TEST_CASE("diffusion loss is seed-deterministic") {
    const auto sched = make_cosine_schedule(25, 0.008, 0.02);
    const OffsetNoiseConfig off{0.1};
    Rng rng(77);
    const Tensor z0 = randn({4, 1, 4, 4}, rng);
    const Tensor cond = randn({4, 1, 4, 4}, rng);
    CannedPredictor zero;
    const real a = diffusion_loss(zero, z0, cond, sched, off, 9);
    const real b = diffusion_loss(zero, z0, cond, sched, off, 9);
    const real c = diffusion_loss(zero, z0, cond, sched, off, 10);
    CHECK(a == b);
    CHECK(a != c);
}

TEST_CASE("diffusion loss gradient matches finite differences") {
    auto cfg = tiny_cfg(1, 4);
    UNet net(cfg);
    Rng rng(303);
    net.init_weights(rng);
    randomize_params(net, rng);

    const Tensor z0 = randn({2, 1, 4, 4}, rng);
    const Tensor cond = randn({2, 1, 4, 4}, rng);
    const auto sched = make_cosine_schedule(15, 0.008, 0.02);
    const OffsetNoiseConfig off{0.1};
    const std::uint64_t seed = 42;

    for (auto* p : net.params()) p->grad.fill(0.0);
    Rng back_rng(seed);
    const real loss = diffusion_loss_backward(net, z0, cond, sched, off, back_rng);
    CHECK(std::isfinite(loss));

    UNetPredictor pred(net);
    CHECK(diffusion_loss(pred, z0, cond, sched, off, seed) == doctest::Approx(loss).epsilon(1e-12));

    const real h = 1e-5;
    int checked = 0;
    for (auto* p : net.params()) {
        const std::int64_t i = p->value.size() / 2;
        const real keep = p->value[i];
        p->value[i] = keep + h;
        const real up = diffusion_loss(pred, z0, cond, sched, off, seed);
        p->value[i] = keep - h;
        const real down = diffusion_loss(pred, z0, cond, sched, off, seed);
        p->value[i] = keep;
        const real fd = (up - down) / (2.0 * h);
        const real an = p->grad[i];
        CHECK(std::fabs(fd - an) <= 1e-6 + 1e-3 * (std::fabs(fd) + std::fabs(an)));
        ++checked;
    }
    CHECK(checked > 10);
}

TEST_CASE("train_ldm runs, logs, and tracks EMA") {
    auto cfg = tiny_cfg(1, 4);
    UNet net(cfg);
    Rng rng(1);
    net.init_weights(rng);

    std::vector<Tensor> z0s, conds;
    for (int i = 0; i < 6; ++i) {
        z0s.push_back(randn({1, 1, 4, 4}, rng));
        conds.push_back(randn({1, 1, 4, 4}, rng));
    }
    const auto sched = make_cosine_schedule(12, 0.008, 0.02);
    const OffsetNoiseConfig off{0.1};

    nn::AdamConfig acfg;
    acfg.lr = 2e-4;
    acfg.weight_decay = 0.01;
    nn::Adam opt(acfg, net.params());
    nn::Ema ema(0.995, net.params());

    LdmTrainConfig tcfg;
    tcfg.epochs = 2;
    tcfg.batch_size = 2;
    tcfg.seed = 31;

    int hooks = 0;
    const auto losses = train_ldm(net, opt, ema, z0s, conds, sched, off, tcfg,
                                  [&](int, real, real) { ++hooks; });
    REQUIRE(losses.size() == 2);
    CHECK(hooks == 2);
    for (real l : losses) CHECK(std::isfinite(l));

    bool shadow_differs = false;
    const auto& params = net.params();
    for (size_t i = 0; i < params.size(); ++i)
        for (std::int64_t k = 0; k < params[i]->value.size(); ++k)
            shadow_differs = shadow_differs || ema.shadow[i][k] != params[i]->value[k];
    CHECK(shadow_differs);
}

TEST_CASE("two epochs at once equals one epoch then a resumed epoch") {
    const auto sched = make_cosine_schedule(10, 0.008, 0.02);
    const OffsetNoiseConfig off{0.1};

    auto build = [&](UNet& net, std::vector<Tensor>& z0s, std::vector<Tensor>& conds) {
        Rng rng(88);
        net.init_weights(rng);
        for (int i = 0; i < 4; ++i) {
            z0s.push_back(randn({1, 1, 4, 4}, rng));
            conds.push_back(randn({1, 1, 4, 4}, rng));
        }
    };

    auto flatten = [](UNet& net) {
        std::vector<real> flat;
        for (auto* p : net.params())
            for (std::int64_t i = 0; i < p->value.size(); ++i) flat.push_back(p->value[i]);
        return flat;
    };

    auto cfg = tiny_cfg(1, 4);
    LdmTrainConfig tcfg;
    tcfg.batch_size = 2;
    tcfg.seed = 5;

    UNet one(cfg);
    std::vector<Tensor> az, ac;
    build(one, az, ac);
    nn::Adam opt_a(nn::AdamConfig{}, one.params());
    nn::Ema ema_a(0.995, one.params());
    tcfg.start_epoch = 0;
    tcfg.epochs = 2;
    const auto losses_a = train_ldm(one, opt_a, ema_a, az, ac, sched, off, tcfg, nullptr);

    UNet two(cfg);
    std::vector<Tensor> bz, bc;
    build(two, bz, bc);
    nn::Adam opt_b(nn::AdamConfig{}, two.params());
    nn::Ema ema_b(0.995, two.params());
    tcfg.start_epoch = 0;
    tcfg.epochs = 1;
    const auto first = train_ldm(two, opt_b, ema_b, bz, bc, sched, off, tcfg, nullptr);
    tcfg.start_epoch = 1;
    tcfg.epochs = 2;
    const auto second = train_ldm(two, opt_b, ema_b, bz, bc, sched, off, tcfg, nullptr);

    REQUIRE(losses_a.size() == 2);
    REQUIRE(first.size() == 1);
    REQUIRE(second.size() == 1);
    CHECK(losses_a[0] == first[0]);
    CHECK(losses_a[1] == second[0]);

    const auto fa = flatten(one), fb = flatten(two);
    REQUIRE(fa.size() == fb.size());
    CHECK(std::memcmp(fa.data(), fb.data(), fa.size() * sizeof(real)) == 0);
    for (size_t i = 0; i < ema_a.shadow.size(); ++i)
        for (std::int64_t k = 0; k < ema_a.shadow[i].size(); ++k)
            CHECK(ema_a.shadow[i][k] == ema_b.shadow[i][k]);
}
