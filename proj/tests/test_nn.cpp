#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstring>
#include <functional>

#include "doctest.h"
#include "ldm/unet.hpp"
#include "nn/activations.hpp"
#include "nn/adam.hpp"
#include "nn/attention.hpp"
#include "nn/conv2d.hpp"
#include "nn/ema.hpp"
#include "nn/embedding.hpp"
#include "nn/linear.hpp"
#include "nn/norm.hpp"
#include "nn/resblock.hpp"
#include "nn/sequential.hpp"
#include "nn/updown.hpp"

using namespace bsldm;
using namespace bsldm::nn;

namespace {

Tensor randn(std::vector<int> shape, Rng& rng, real scale = 1.0) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * rng.normal();
    return t;
}

void randomize_params(const std::vector<Param*>& ps, Rng& rng, real scale = 0.3) {
    for (Param* p : ps)
        for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] = scale * rng.normal();
}

real dot(const Tensor& a, const Tensor& b) {
    REQUIRE(a.size() == b.size());
    real s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Central finite differences against analytic gradients. Each entry of
// `checks` pairs a mutable value tensor with its analytic gradient snapshot;
// up to `samples` randomly chosen entries per tensor are perturbed.
void fd_check(const std::function<real()>& loss,
              const std::vector<std::pair<Tensor*, const Tensor*>>& checks, int samples,
              Rng& rng, real tol = 2e-4, real h = 1e-4) {
    for (const auto& [value, analytic] : checks) {
        REQUIRE(value->size() == analytic->size());
        const int n = static_cast<int>(value->size());
        for (int s = 0; s < samples; ++s) {
            std::size_t i;
            if (n <= samples) {
                if (s >= n) break;
                i = static_cast<std::size_t>(s);
            } else {
                i = static_cast<std::size_t>(rng.uniform_int(n));
            }
            const real orig = (*value)[i];
            (*value)[i] = orig + h;
            const real lp = loss();
            (*value)[i] = orig - h;
            const real lm = loss();
            (*value)[i] = orig;
            const real fd = (lp - lm) / (2.0 * h);
            const real an = (*analytic)[i];
            const real err = std::abs(fd - an);
            INFO("entry ", i, ": fd=", fd, " analytic=", an);
            CHECK(err <= 1e-7 + tol * (std::abs(fd) + std::abs(an)));
        }
    }
}

std::vector<Tensor> snapshot_grads(const std::vector<Param*>& ps) {
    std::vector<Tensor> out;
    out.reserve(ps.size());
    for (const Param* p : ps) out.push_back(p->grad);
    return out;
}

std::vector<std::pair<Tensor*, const Tensor*>> param_checks(const std::vector<Param*>& ps,
                                                            const std::vector<Tensor>& snap) {
    std::vector<std::pair<Tensor*, const Tensor*>> checks;
    for (std::size_t i = 0; i < ps.size(); ++i) checks.push_back({&ps[i]->value, &snap[i]});
    return checks;
}

}  // namespace

TEST_CASE("conv2d forward matches direct convolution") {
    Rng rng(11);
    Conv2d conv("c", 2, 3, 3, 1, 1);
    conv.init_weights(rng);
    Tensor x = randn({1, 2, 4, 4}, rng);
    Tensor y = conv.forward(x);
    REQUIRE(y.shape() == std::vector<int>{1, 3, 4, 4});
    // brute-force reference
    for (int oc = 0; oc < 3; ++oc)
        for (int oy = 0; oy < 4; ++oy)
            for (int ox = 0; ox < 4; ++ox) {
                real acc = conv.bias.value[static_cast<std::size_t>(oc)];
                for (int ic = 0; ic < 2; ++ic)
                    for (int ky = 0; ky < 3; ++ky)
                        for (int kx = 0; kx < 3; ++kx) {
                            int iy = oy + ky - 1, ix = ox + kx - 1;
                            if (iy < 0 || iy >= 4 || ix < 0 || ix >= 4) continue;
                            acc += conv.weight.value.at(oc, ic, ky, kx) * x.at(0, ic, iy, ix);
                        }
                CHECK(y.at(0, oc, oy, ox) == doctest::Approx(acc).epsilon(1e-12));
            }
}

TEST_CASE("conv2d gradients (stride 1, pad 1)") {
    Rng rng(12);
    Conv2d conv("c", 3, 4, 3, 1, 1);
    conv.init_weights(rng);
    Tensor x = randn({2, 3, 5, 5}, rng);
    Tensor w;
    auto loss = [&]() { return dot(conv.forward(x), w); };
    w = randn({2, 4, 5, 5}, rng);
    std::vector<Param*> ps;
    conv.collect_params(ps);
    zero_grads(ps);
    loss();
    Tensor gx = conv.backward(w);
    auto snap = snapshot_grads(ps);
    auto checks = param_checks(ps, snap);
    checks.push_back({&x, &gx});
    fd_check(loss, checks, 40, rng);
}

TEST_CASE("conv2d gradients (stride 2 on odd input)") {
    Rng rng(13);
    Conv2d conv("c", 2, 3, 3, 2, 1);
    conv.init_weights(rng);
    Tensor x = randn({2, 2, 5, 5}, rng);
    Tensor y = conv.forward(x);
    REQUIRE(y.shape() == std::vector<int>{2, 3, 3, 3});
    Tensor w = randn(y.shape(), rng);
    auto loss = [&]() { return dot(conv.forward(x), w); };
    std::vector<Param*> ps;
    conv.collect_params(ps);
    zero_grads(ps);
    loss();
    Tensor gx = conv.backward(w);
    auto snap = snapshot_grads(ps);
    auto checks = param_checks(ps, snap);
    checks.push_back({&x, &gx});
    fd_check(loss, checks, 40, rng);
}

TEST_CASE("conv2d gradients (1x1)") {
    Rng rng(14);
    Conv2d conv("c", 4, 2, 1, 1, 0);
    conv.init_weights(rng);
    Tensor x = randn({1, 4, 3, 3}, rng);
    Tensor w = randn({1, 2, 3, 3}, rng);
    auto loss = [&]() { return dot(conv.forward(x), w); };
    std::vector<Param*> ps;
    conv.collect_params(ps);
    zero_grads(ps);
    loss();
    Tensor gx = conv.backward(w);
    auto snap = snapshot_grads(ps);
    auto checks = param_checks(ps, snap);
    checks.push_back({&x, &gx});
    fd_check(loss, checks, 40, rng);
}

TEST_CASE("linear gradients") {
    Rng rng(15);
    Linear fc("fc", 5, 3);
    fc.init_weights(rng);
    Tensor x = randn({4, 5}, rng);
    Tensor w = randn({4, 3}, rng);
    auto loss = [&]() { return dot(fc.forward(x), w); };
    std::vector<Param*> ps;
    fc.collect_params(ps);
    zero_grads(ps);
    loss();
    Tensor gx = fc.backward(w);
    auto snap = snapshot_grads(ps);
    auto checks = param_checks(ps, snap);
    checks.push_back({&x, &gx});
    fd_check(loss, checks, 30, rng);
}

TEST_CASE("groupnorm gradients") {
    Rng rng(16);
    GroupNorm gn("gn", 6, 3);
    std::vector<Param*> ps;
    gn.collect_params(ps);
    randomize_params(ps, rng, 1.0);
    Tensor x = randn({2, 6, 3, 3}, rng);
    Tensor w = randn(x.shape(), rng);
    auto loss = [&]() { return dot(gn.forward(x), w); };
    zero_grads(ps);
    loss();
    Tensor gx = gn.backward(w);
    auto snap = snapshot_grads(ps);
    auto checks = param_checks(ps, snap);
    checks.push_back({&x, &gx});
    fd_check(loss, checks, 40, rng);
}

TEST_CASE("groupnorm normalizes per group") {
    Rng rng(17);
    GroupNorm gn("gn", 4, 2);
    Tensor x = randn({1, 4, 4, 4}, rng, 3.0);
    Tensor y = gn.forward(x);
    // gamma=1, beta=0 at construction: each (sample, group) slab should be
    // zero-mean unit-variance.
    for (int g = 0; g < 2; ++g) {
        real mean = 0.0, var = 0.0;
        const int m = 2 * 16;
        for (int c = 2 * g; c < 2 * g + 2; ++c)
            for (int i = 0; i < 16; ++i) mean += y.at(0, c, i / 4, i % 4);
        mean /= m;
        for (int c = 2 * g; c < 2 * g + 2; ++c)
            for (int i = 0; i < 16; ++i) {
                real d = y.at(0, c, i / 4, i % 4) - mean;
                var += d * d;
            }
        var /= m;
        CHECK(std::abs(mean) < 1e-10);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
    }
}

TEST_CASE("activation gradients") {
    Rng rng(18);
    Tensor x = randn({2, 3, 4, 4}, rng);
    Tensor w = randn(x.shape(), rng);

    Silu silu;
    auto loss_s = [&]() { return dot(silu.forward(x), w); };
    loss_s();
    Tensor gx = silu.backward(w);
    fd_check(loss_s, {{&x, &gx}}, 30, rng);

    LeakyRelu lrelu(0.2);
    auto loss_l = [&]() { return dot(lrelu.forward(x), w); };
    loss_l();
    gx = lrelu.backward(w);
    fd_check(loss_l, {{&x, &gx}}, 30, rng);

    TanhLayer th;
    auto loss_t = [&]() { return dot(th.forward(x), w); };
    loss_t();
    gx = th.backward(w);
    fd_check(loss_t, {{&x, &gx}}, 30, rng);
}

TEST_CASE("upsample2x forward and gradients") {
    Rng rng(19);
    Upsample2x up;
    Tensor x = randn({1, 2, 3, 3}, rng);
    Tensor y = up.forward(x);
    REQUIRE(y.shape() == std::vector<int>{1, 2, 6, 6});
    CHECK(y.at(0, 1, 4, 5) == x.at(0, 1, 2, 2));
    Tensor w = randn(y.shape(), rng);
    auto loss = [&]() { return dot(up.forward(x), w); };
    loss();
    Tensor gx = up.backward(w);
    fd_check(loss, {{&x, &gx}}, 30, rng);
}

TEST_CASE("self-attention gradients") {
    Rng rng(20);
    SelfAttention2d attn("a", 4, 2);
    std::vector<Param*> ps;
    attn.collect_params(ps);
    randomize_params(ps, rng, 0.4);  // init zeroes proj; FD needs it live
    Tensor x = randn({2, 4, 3, 3}, rng);
    Tensor w = randn(x.shape(), rng);
    auto loss = [&]() { return dot(attn.forward(x), w); };
    zero_grads(ps);
    loss();
    Tensor gx = attn.backward(w);
    auto snap = snapshot_grads(ps);
    auto checks = param_checks(ps, snap);
    checks.push_back({&x, &gx});
    fd_check(loss, checks, 25, rng);
}

TEST_CASE("self-attention starts as identity") {
    Rng rng(21);
    SelfAttention2d attn("a", 4, 2);
    attn.init_weights(rng);  // proj zero-initialized
    Tensor x = randn({1, 4, 3, 3}, rng);
    Tensor y = attn.forward(x);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);
}

TEST_CASE("resblock gradients with timestep embedding") {
    Rng rng(22);
    ResBlock blk("r", 3, 5, 6, 1);
    std::vector<Param*> ps;
    blk.collect_params(ps);
    randomize_params(ps, rng, 0.4);
    Tensor x = randn({2, 3, 4, 4}, rng);
    Tensor temb = randn({2, 6}, rng);
    Tensor w = randn({2, 5, 4, 4}, rng);
    auto loss = [&]() { return dot(blk.forward(x, temb), w); };
    zero_grads(ps);
    loss();
    Tensor gtemb = Tensor::zeros_like(temb);
    Tensor gx = blk.backward(w, &gtemb);
    auto snap = snapshot_grads(ps);
    auto checks = param_checks(ps, snap);
    checks.push_back({&x, &gx});
    checks.push_back({&temb, &gtemb});
    fd_check(loss, checks, 30, rng);
}

TEST_CASE("resblock gradients without embedding, matched channels") {
    Rng rng(23);
    ResBlock blk("r", 4, 4, 0, 2);
    std::vector<Param*> ps;
    blk.collect_params(ps);
    randomize_params(ps, rng, 0.4);
    Tensor x = randn({1, 4, 3, 3}, rng);
    Tensor w = randn(x.shape(), rng);
    Tensor empty;
    auto loss = [&]() { return dot(blk.forward(x, empty), w); };
    zero_grads(ps);
    loss();
    Tensor gx = blk.backward(w, nullptr);
    auto snap = snapshot_grads(ps);
    auto checks = param_checks(ps, snap);
    checks.push_back({&x, &gx});
    fd_check(loss, checks, 30, rng);
}

TEST_CASE("sequential chain gradients") {
    Rng rng(24);
    Sequential net;
    net.add<Conv2d>("c1", 2, 4, 3, 1, 1);
    net.add<Silu>();
    net.add<GroupNorm>("gn", 4, 2);
    net.add<LeakyRelu>(0.2);
    net.add<Conv2d>("c2", 4, 2, 1, 1, 0);
    std::vector<Param*> ps;
    net.collect_params(ps);
    randomize_params(ps, rng, 0.4);
    Tensor x = randn({2, 2, 4, 4}, rng);
    Tensor w = randn({2, 2, 4, 4}, rng);
    auto loss = [&]() { return dot(net.forward(x), w); };
    zero_grads(ps);
    loss();
    Tensor gx = net.backward(w);
    auto snap = snapshot_grads(ps);
    auto checks = param_checks(ps, snap);
    checks.push_back({&x, &gx});
    fd_check(loss, checks, 30, rng);
}

TEST_CASE("sinusoidal embedding values") {
    Tensor e = sinusoidal_embedding({0, 5}, 8);
    REQUIRE(e.shape() == std::vector<int>{2, 8});
    for (int j = 0; j < 4; ++j) {
        CHECK(e[static_cast<std::size_t>(j)] == 0.0);          // sin(0)
        CHECK(e[static_cast<std::size_t>(4 + j)] == 1.0);      // cos(0)
        real freq = std::exp(-std::log(10000.0) * j / 3.0);
        CHECK(e[static_cast<std::size_t>(8 + j)] ==
              doctest::Approx(std::sin(5.0 * freq)).epsilon(1e-12));
        CHECK(e[static_cast<std::size_t>(12 + j)] ==
              doctest::Approx(std::cos(5.0 * freq)).epsilon(1e-12));
    }
}

TEST_CASE("unet forward shape and determinism") {
    ldm::UNetConfig cfg;
    cfg.in_channels = 2;
    cfg.out_channels = 1;
    cfg.base_channels = 4;
    cfg.channel_mults = {1, 2};
    cfg.attention_resolutions = {2};
    cfg.num_res_blocks = 1;
    cfg.norm_groups = 2;
    cfg.temb_dim = 8;
    cfg.latent_size = 4;
    ldm::UNet net(cfg);
    Rng rng(25);
    net.init_weights(rng);
    randomize_params(net.params(), rng, 0.3);

    Tensor x = randn({2, 2, 4, 4}, rng);
    Tensor y1 = net.forward(x, {0, 3});
    REQUIRE(y1.shape() == std::vector<int>{2, 1, 4, 4});
    Tensor y2 = net.forward(x, {0, 3});
    CHECK(std::memcmp(y1.data(), y2.data(), y1.size() * sizeof(real)) == 0);
}

TEST_CASE("unet batch permutation permutes outputs") {
    ldm::UNetConfig cfg;
    cfg.in_channels = 2;
    cfg.out_channels = 1;
    cfg.base_channels = 4;
    cfg.channel_mults = {1, 2};
    cfg.attention_resolutions = {2};
    cfg.num_res_blocks = 1;
    cfg.norm_groups = 2;
    cfg.temb_dim = 8;
    cfg.latent_size = 4;
    ldm::UNet net(cfg);
    Rng rng(26);
    net.init_weights(rng);
    randomize_params(net.params(), rng, 0.3);

    Tensor a = randn({1, 2, 4, 4}, rng);
    Tensor b = randn({1, 2, 4, 4}, rng);
    Tensor ab = stack_batch({&a, &b});
    Tensor ba = stack_batch({&b, &a});
    Tensor y_ab = net.forward(ab, {7, 2});
    Tensor y_ba = net.forward(ba, {2, 7});
    Tensor s0 = slice_batch(y_ab, 0), s1 = slice_batch(y_ab, 1);
    Tensor r0 = slice_batch(y_ba, 0), r1 = slice_batch(y_ba, 1);
    CHECK(std::memcmp(s0.data(), r1.data(), s0.size() * sizeof(real)) == 0);
    CHECK(std::memcmp(s1.data(), r0.data(), s1.size() * sizeof(real)) == 0);
}

TEST_CASE("unet gradients") {
    ldm::UNetConfig cfg;
    cfg.in_channels = 2;
    cfg.out_channels = 1;
    cfg.base_channels = 4;
    cfg.channel_mults = {1, 2};
    cfg.attention_resolutions = {2};
    cfg.num_res_blocks = 1;
    cfg.norm_groups = 2;
    cfg.temb_dim = 8;
    cfg.latent_size = 4;
    ldm::UNet net(cfg);
    Rng rng(27);
    net.init_weights(rng);
    auto& ps = net.params();
    randomize_params(ps, rng, 0.3);

    Tensor x = randn({2, 2, 4, 4}, rng);
    std::vector<int> steps = {1, 6};
    Tensor w = randn({2, 1, 4, 4}, rng);
    auto loss = [&]() { return dot(net.forward(x, steps), w); };
    zero_grads(ps);
    loss();
    Tensor gx = net.backward(w);
    auto snap = snapshot_grads(ps);
    // sample a handful of entries from every parameter tensor plus the input
    auto checks = param_checks(ps, snap);
    checks.push_back({&x, &gx});
    fd_check(loss, checks, 6, rng, 5e-4);
}

TEST_CASE("adam single step matches hand computation") {
    Param p("p", {2});
    p.value[0] = 1.0;
    p.value[1] = -2.0;
    p.grad[0] = 1.0;
    p.grad[1] = 0.5;
    AdamConfig cfg;
    cfg.lr = 0.1;
    Adam opt(cfg, {&p});
    opt.step();
    // bias-corrected first step: mhat = g, vhat = g^2, so w -= lr * sign(g)
    CHECK(p.value[0] == doctest::Approx(1.0 - 0.1).epsilon(1e-6));
    CHECK(p.value[1] == doctest::Approx(-2.0 - 0.1).epsilon(1e-6));
    CHECK(opt.t == 1);
}

TEST_CASE("adamw applies decoupled weight decay") {
    Param p("p", {1});
    p.value[0] = 1.0;
    p.grad[0] = 0.0;
    AdamConfig cfg;
    cfg.lr = 0.5;
    cfg.weight_decay = 0.1;
    Adam opt(cfg, {&p});
    opt.step();
    // zero grad: only the decay term acts
    CHECK(p.value[0] == doctest::Approx(1.0 * (1.0 - 0.5 * 0.1)).epsilon(1e-12));
}

TEST_CASE("ema update arithmetic") {
    Param p("p", {1});
    p.value[0] = 0.0;
    Ema ema(0.995, {&p});
    p.value[0] = 1.0;
    ema.update({&p});
    CHECK(ema.shadow[0][0] == doctest::Approx(0.005).epsilon(1e-12));

    // decay 0 tracks params exactly after one update
    Param q("q", {1});
    q.value[0] = 0.3;
    Ema ema0(0.0, {&q});
    q.value[0] = -1.7;
    ema0.update({&q});
    CHECK(ema0.shadow[0][0] == doctest::Approx(-1.7).epsilon(1e-12));
}

TEST_CASE("ema converges geometrically to constant params") {
    Param p("p", {1});
    p.value[0] = 2.0;
    Ema ema(0.995, {&p});
    ema.shadow[0][0] = 0.0;  // start the shadow away from the param
    real prev_gap = 2.0;
    for (int k = 0; k < 10; ++k) {
        ema.update({&p});
        real gap = 2.0 - ema.shadow[0][0];
        CHECK(gap / prev_gap == doctest::Approx(0.995).epsilon(1e-9));
        prev_gap = gap;
    }
}

TEST_CASE("ema copy_to restores shadow into live params") {
    Param p("p", {2});
    p.value[0] = 1.0;
    p.value[1] = 2.0;
    Ema ema(0.9, {&p});
    p.value[0] = 5.0;
    p.value[1] = -5.0;
    ema.copy_to({&p});
    CHECK(p.value[0] == 1.0);
    CHECK(p.value[1] == 2.0);
}
