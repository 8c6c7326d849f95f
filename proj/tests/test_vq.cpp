#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>

#include "core/error.hpp"
#include "core/rng.hpp"
#include "metrics/features.hpp"
#include "vq/codebook.hpp"
#include "vq/vqgan.hpp"

using namespace bsldm;
using namespace bsldm::vq;

namespace {

Tensor randn(const std::vector<int>& shape, Rng& rng) {
    Tensor t(shape);
    rng.normal_fill(t.data(), t.size());
    return t;
}

// Exhaustive reference: nearest code under squared Euclidean distance with
// strict improvement only, so earlier (lower) indices win ties.
int nearest_code_ref(const Tensor& z, const Codebook& cb, int n, int y, int x) {
    const auto c = z.dim(1), h = z.dim(2), w = z.dim(3);
    int best = 0;
    real best_d = std::numeric_limits<real>::max();
    for (int k = 0; k < cb.K(); ++k) {
        real d = 0.0;
        for (int j = 0; j < c; ++j) {
            const real diff = z[((n * c + j) * h + y) * w + x] - cb.codes.value[k * cb.d() + j];
            d += diff * diff;
        }
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("quantize agrees with exhaustive nearest-code search") {
    Rng rng(41);
    Codebook cb(64, 3);
    cb.init_weights(rng);
    const Tensor z = randn({4, 3, 8, 8}, rng);
    const auto q = quantize(z, cb);

    const auto c = z.dim(1), h = z.dim(2), w = z.dim(3);
    REQUIRE(q.z_q.same_shape(z));
    REQUIRE(static_cast<std::int64_t>(q.indices.size()) == z.dim(0) * h * w);
    size_t site = 0;
    for (int n = 0; n < z.dim(0); ++n)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x, ++site) {
                const int ref = nearest_code_ref(z, cb, n, y, x);
                CHECK(q.indices[site] == ref);
                for (int j = 0; j < c; ++j)
                    CHECK(q.z_q[((n * c + j) * h + y) * w + x] == cb.codes.value[ref * 3 + j]);
            }
}

TEST_CASE("quantize resolves ties to the lowest code index") {
    SUBCASE("duplicate codes") {
        Codebook cb(12, 2);
        Rng rng(7);
        cb.init_weights(rng);
        // make codes 5 and 9 identical, then present exactly that vector
        cb.codes.value[9 * 2 + 0] = cb.codes.value[5 * 2 + 0] = 0.33;
        cb.codes.value[9 * 2 + 1] = cb.codes.value[5 * 2 + 1] = -0.2;
        Tensor z({1, 2, 1, 1});
        z[0] = 0.33;
        z[1] = -0.2;
        const auto q = quantize(z, cb);
        CHECK(q.indices[0] == 5);
    }
    SUBCASE("equidistant codes") {
        Codebook cb(2, 1);
        cb.codes.value[0] = 1.0;
        cb.codes.value[1] = -1.0;
        Tensor z({1, 1, 1, 1});
        z[0] = 0.0;
        const auto q = quantize(z, cb);
        CHECK(q.indices[0] == 0);
        CHECK(q.z_q[0] == 1.0);
    }
}

TEST_CASE("quantization loss terms match a brute-force recomputation") {
    Rng rng(13);
    Codebook cb(16, 3);
    cb.init_weights(rng);
    const Tensor z = randn({2, 3, 4, 4}, rng);
    const auto q = quantize(z, cb);

    real acc = 0.0;
    for (std::int64_t i = 0; i < z.size(); ++i) {
        const real d = z[i] - q.z_q[i];
        acc += d * d;
    }
    acc /= static_cast<real>(z.size());
    // both sides of the stop-gradient carry the same value
    CHECK(q.codebook_term == doctest::Approx(acc).epsilon(1e-6));
    CHECK(q.commit_term == doctest::Approx(acc).epsilon(1e-6));
    CHECK(q.codebook_term == q.commit_term);
}

TEST_CASE("quantize validates channel count") {
    Codebook cb(8, 3);
    Rng rng(1);
    cb.init_weights(rng);
    Tensor z({1, 2, 4, 4});
    CHECK_THROWS_AS(quantize(z, cb), Error);
}

TEST_CASE("straight-through and commitment gradients") {
    Rng rng(29);
    Codebook cb(8, 2);
    cb.init_weights(rng);
    const Tensor z = randn({1, 2, 3, 3}, rng);
    const auto q = quantize(z, cb);
    const Tensor g_zq = randn(z.shape(), rng);

    Tensor gz(z.shape()), gcodes(cb.codes.value.shape());
    accumulate_quantize_grads(z, q, g_zq, 0.7, 0.3, gz, gcodes);

    const real inv = 1.0 / static_cast<real>(z.size());
    for (std::int64_t i = 0; i < z.size(); ++i)
        CHECK(gz[i] == doctest::Approx(g_zq[i] + 0.3 * 2.0 * (z[i] - q.z_q[i]) * inv)
                           .epsilon(1e-12));

    Tensor ref_codes(cb.codes.value.shape());
    const auto c = z.dim(1), h = z.dim(2), w = z.dim(3);
    size_t site = 0;
    for (int n = 0; n < z.dim(0); ++n)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x, ++site) {
                const int k = q.indices[site];
                for (int j = 0; j < c; ++j) {
                    const real zv = z[((n * c + j) * h + y) * w + x];
                    const real cv = cb.codes.value[k * 2 + j];
                    ref_codes[k * 2 + j] += 0.7 * 2.0 * (cv - zv) * inv;
                }
            }
    for (std::int64_t i = 0; i < gcodes.size(); ++i)
        CHECK(gcodes[i] == doctest::Approx(ref_codes[i]).epsilon(1e-12));
}

TEST_CASE("commitment gradient matches finite differences away from code boundaries") {
    Rng rng(31);
    Codebook cb(6, 2);
    cb.init_weights(rng);
    Tensor z = randn({1, 2, 2, 2}, rng);
    const auto q0 = quantize(z, cb);

    Tensor gz(z.shape()), gcodes(cb.codes.value.shape());
    Tensor zero_gzq(z.shape());
    accumulate_quantize_grads(z, q0, zero_gzq, 0.0, 1.0, gz, gcodes);

    const real h = 1e-6;
    for (std::int64_t i = 0; i < z.size(); ++i) {
        const real keep = z[i];
        z[i] = keep + h;
        auto qp = quantize(z, cb);
        z[i] = keep - h;
        auto qm = quantize(z, cb);
        z[i] = keep;
        REQUIRE(qp.indices == q0.indices);  // no assignment flip at this step size
        REQUIRE(qm.indices == q0.indices);
        const real fd = (qp.commit_term - qm.commit_term) / (2.0 * h);
        CHECK(gz[i] == doctest::Approx(fd).epsilon(1e-4));
    }
}

TEST_CASE("hybrid loss on perfect reconstruction is zero") {
    Rng rng(3);
    const Tensor x = randn({1, 1, 8, 8}, rng);
    metrics::IdentityExtractor fe;
    CompressorConfig cfg;
    const auto rep = hybrid_loss(x, x, Tensor(), 0.0, 0.0, fe, cfg);
    CHECK(rep.l1 == 0.0);
    CHECK(rep.perceptual == 0.0);
    CHECK(rep.adversarial == 0.0);
    CHECK(rep.quantization == 0.0);
    CHECK(rep.total == 0.0);
}

TEST_CASE("hybrid loss L1 term is the mean absolute difference") {
    Rng rng(5);
    const Tensor x = randn({2, 1, 4, 4}, rng);
    Tensor x_hat = x;
    for (std::int64_t i = 0; i < x_hat.size(); ++i) x_hat[i] += 0.5;
    metrics::IdentityExtractor fe;
    CompressorConfig cfg;
    const auto rep = hybrid_loss(x, x_hat, Tensor(), 0.0, 0.0, fe, cfg);
    CHECK(rep.l1 == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(rep.perceptual == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("hybrid loss with unit component losses totals 2.011") {
    // alternating +-1 differences give l1 = 1 and identity-perceptual = 1;
    // every patch score e^-1 gives adversarial = 1; terms 0.75 + 0.25*1 give
    // quantization = 1. Weights (1, 0.001, 0.01, 1) sum to 2.011.
    Tensor x({1, 1, 4, 4}), x_hat({1, 1, 4, 4});
    for (std::int64_t i = 0; i < x.size(); ++i) x_hat[i] = (i % 2 == 0) ? 1.0 : -1.0;
    Tensor score({1, 1, 2, 2});
    score.fill(std::exp(-1.0));
    metrics::IdentityExtractor fe;
    CompressorConfig cfg;  // beta_commit = 0.25
    const auto rep = hybrid_loss(x, x_hat, score, 0.75, 1.0, fe, cfg);
    CHECK(rep.l1 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep.perceptual == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep.adversarial == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep.quantization == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep.total == doctest::Approx(2.011).epsilon(1e-9));
}

TEST_CASE("hybrid loss total equals the weighted sum on random inputs") {
    Rng rng(77);
    CompressorConfig cfg;
    cfg.lambda_l1 = 0.9;
    cfg.lambda_per = 0.02;
    cfg.lambda_adv = 0.05;
    cfg.lambda_qua = 1.3;
    cfg.beta_commit = 0.4;
    metrics::SeededConvExtractor fe;
    for (int trial = 0; trial < 5; ++trial) {
        const Tensor x = randn({1, 1, 8, 8}, rng);
        const Tensor x_hat = randn({1, 1, 8, 8}, rng);
        Tensor score({1, 1, 3, 3});
        for (std::int64_t i = 0; i < score.size(); ++i) score[i] = rng.uniform(0.05, 0.95);
        const real cb_term = rng.uniform(0.0, 1.0), cm_term = rng.uniform(0.0, 1.0);
        const auto rep = hybrid_loss(x, x_hat, score, cb_term, cm_term, fe, cfg);
        const real want = cfg.lambda_l1 * rep.l1 + cfg.lambda_per * rep.perceptual +
                          cfg.lambda_adv * rep.adversarial + cfg.lambda_qua * rep.quantization;
        CHECK(rep.total == doctest::Approx(want).epsilon(1e-9));
        CHECK(rep.quantization == doctest::Approx(cb_term + 0.4 * cm_term).epsilon(1e-12));
    }
}

TEST_CASE("hybrid loss rejects out-of-range discriminator scores") {
    Tensor x({1, 1, 2, 2}), x_hat({1, 1, 2, 2});
    metrics::IdentityExtractor fe;
    CompressorConfig cfg;
    Tensor score({1, 1, 1, 1});
    score[0] = 1.5;
    CHECK_THROWS_AS(hybrid_loss(x, x_hat, score, 0.0, 0.0, fe, cfg), Error);
    score[0] = 0.0;
    CHECK_THROWS_AS(hybrid_loss(x, x_hat, score, 0.0, 0.0, fe, cfg), Error);
}

TEST_CASE("encode and decode shapes for r=4") {
    CompressorConfig cfg;
    cfg.r = 4;
    cfg.latent_channels = 3;
    cfg.codebook_size = 32;
    cfg.base_channels = 4;
    cfg.norm_groups = 2;
    VqGan model(cfg);
    CHECK(model.levels() == 3);
    Rng rng(2);
    model.init_weights(rng);

    Tensor x({2, 1, 64, 64});
    for (std::int64_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.0, 1.0);
    const Tensor z = model.encode(x);
    REQUIRE(z.ndim() == 4);
    CHECK(z.dim(0) == 2);
    CHECK(z.dim(1) == 3);
    CHECK(z.dim(2) == 16);
    CHECK(z.dim(3) == 16);
    for (std::int64_t i = 0; i < z.size(); ++i) {
        CHECK(z[i] < 1.0);
        CHECK(z[i] > -1.0);
    }

    const auto q = model.quantize_latent(z);
    const Tensor out = model.decode(q.z_q);
    CHECK(out.dim(0) == 2);
    CHECK(out.dim(1) == 1);
    CHECK(out.dim(2) == 64);
    CHECK(out.dim(3) == 64);
    for (std::int64_t i = 0; i < out.size(); ++i) {
        CHECK(out[i] < 1.0);
        CHECK(out[i] > -1.0);
    }

    Tensor bad({1, 1, 30, 30});
    CHECK_THROWS_AS(model.encode(bad), Error);
}

TEST_CASE("compressor config validation") {
    CompressorConfig cfg;
    cfg.r = 3;  // not a power of two
    CHECK_THROWS_AS((VqGan{cfg}), Error);
    cfg.r = 0;
    CHECK_THROWS_AS((VqGan{cfg}), Error);
}

TEST_CASE("one epoch of vqgan training moves parameters and reports finite stats") {
    CompressorConfig cfg;
    cfg.r = 4;
    cfg.latent_channels = 2;
    cfg.codebook_size = 16;
    cfg.base_channels = 4;
    cfg.norm_groups = 2;
    cfg.disc_base_channels = 4;
    VqGan model(cfg);
    Rng rng(9);
    model.init_weights(rng);

    std::vector<Tensor> images;
    for (int i = 0; i < 8; ++i) {
        Tensor img({1, 1, 16, 16});
        for (std::int64_t k = 0; k < img.size(); ++k) img[k] = rng.uniform(-0.9, 0.9);
        images.push_back(std::move(img));
    }

    nn::AdamConfig gcfg;
    gcfg.lr = 1e-4;
    nn::AdamConfig dcfg;
    dcfg.lr = 5e-4;
    nn::Adam gen_opt(gcfg, model.gen_params());
    nn::Adam disc_opt(dcfg, model.disc_params());

    std::vector<real> before;
    for (auto* p : model.gen_params()) before.push_back(p->value[0]);
    std::vector<real> disc_before;
    for (auto* p : model.disc_params()) disc_before.push_back(p->value[0]);

    metrics::IdentityExtractor fe;
    VqTrainConfig tcfg;
    tcfg.epochs = 1;
    tcfg.batch_size = 4;
    tcfg.seed = 42;

    SUBCASE("adversarial game active from step zero") {
        tcfg.disc_warmup_steps = 0;
        int hooks = 0;
        const auto stats = train_vqgan(model, gen_opt, disc_opt, images, fe, tcfg,
                                       [&](int, const VqEpochStats&) { ++hooks; });
        REQUIRE(stats.size() == 1);
        CHECK(hooks == 1);
        CHECK(std::isfinite(stats[0].total));
        CHECK(stats[0].l1 > 0.0);
        CHECK(stats[0].adversarial != 0.0);
        CHECK(stats[0].disc_loss > 0.0);
        CHECK(stats[0].codebook_usage > 0.0);
        CHECK(stats[0].codebook_usage <= 1.0);
        bool gen_moved = false, disc_moved = false;
        for (size_t i = 0; i < before.size(); ++i)
            gen_moved = gen_moved || model.gen_params()[i]->value[0] != before[i];
        for (size_t i = 0; i < disc_before.size(); ++i)
            disc_moved = disc_moved || model.disc_params()[i]->value[0] != disc_before[i];
        CHECK(gen_moved);
        CHECK(disc_moved);
    }

    SUBCASE("during warm-up the discriminator stays frozen and the adv term is zero") {
        tcfg.disc_warmup_steps = 1000;
        const auto stats = train_vqgan(model, gen_opt, disc_opt, images, fe, tcfg, nullptr);
        CHECK(stats[0].adversarial == 0.0);
        CHECK(stats[0].disc_loss == 0.0);
        for (size_t i = 0; i < disc_before.size(); ++i)
            CHECK(model.disc_params()[i]->value[0] == disc_before[i]);
    }
}

TEST_CASE("vqgan training is seed-deterministic") {
    auto run = [](std::uint64_t seed) {
        CompressorConfig cfg;
        cfg.r = 2;
        cfg.latent_channels = 2;
        cfg.codebook_size = 8;
        cfg.base_channels = 4;
        cfg.norm_groups = 2;
        cfg.disc_base_channels = 4;
        VqGan model(cfg);
        Rng rng(seed);
        model.init_weights(rng);
        std::vector<Tensor> images;
        for (int i = 0; i < 4; ++i) {
            Tensor img({1, 1, 16, 16});
            for (std::int64_t k = 0; k < img.size(); ++k) img[k] = rng.uniform(-0.9, 0.9);
            images.push_back(std::move(img));
        }
        nn::Adam gen_opt(nn::AdamConfig{}, model.gen_params());
        nn::Adam disc_opt(nn::AdamConfig{}, model.disc_params());
        metrics::IdentityExtractor fe;
        VqTrainConfig tcfg;
        tcfg.epochs = 2;
        tcfg.batch_size = 2;
        tcfg.disc_warmup_steps = 2;
        tcfg.seed = 7;
        train_vqgan(model, gen_opt, disc_opt, images, fe, tcfg, nullptr);
        std::vector<real> flat;
        for (auto* p : model.gen_params())
            for (std::int64_t i = 0; i < p->value.size(); ++i) flat.push_back(p->value[i]);
        return flat;
    };
    const auto a = run(100), b = run(100);
    REQUIRE(a.size() == b.size());
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(real)) == 0);
}
