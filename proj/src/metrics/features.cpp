#include "metrics/features.hpp"

namespace bsldm::metrics {

SeededConvExtractor::SeededConvExtractor(std::uint64_t seed)
    : c1_("feat.c1", 1, 8, 3, 2, 1),
      c2_("feat.c2", 8, 16, 3, 2, 1),
      c3_("feat.c3", 16, 32, 3, 2, 1) {
    Rng rng(seed);
    c1_.init_weights(rng);
    c2_.init_weights(rng);
    c3_.init_weights(rng);
}

std::vector<Tensor> SeededConvExtractor::features(const Tensor& x) {
    require(x.ndim() == 4 && x.dim(1) == 1, Status::InvalidArgument,
            "feature extractor expects single-channel NCHW input");
    Tensor f1 = a1_.forward(c1_.forward(x));
    Tensor f2 = a2_.forward(c2_.forward(f1));
    Tensor f3 = a3_.forward(c3_.forward(f2));
    return {f1, f2, f3};
}

Tensor SeededConvExtractor::grad_input(const std::vector<Tensor>& gfeats) {
    require(gfeats.size() == 3, Status::InvalidArgument, "expected three feature gradients");
    Tensor g = c3_.backward(a3_.backward(gfeats[2]));
    g.add_(gfeats[1]);
    g = c2_.backward(a2_.backward(g));
    g.add_(gfeats[0]);
    return c1_.backward(a1_.backward(g));
}

real feature_distance(FeatureExtractor& fe, const Tensor& a, const Tensor& b) {
    require(a.same_shape(b), Status::InvalidArgument, "feature distance shape mismatch");
    std::vector<Tensor> fb = fe.features(b);
    std::vector<Tensor> fa = fe.features(a);
    real total = 0.0;
    for (std::size_t l = 0; l < fa.size(); ++l) {
        real sum = 0.0;
        for (std::size_t i = 0; i < fa[l].size(); ++i) {
            real d = fa[l][i] - fb[l][i];
            sum += d * d;
        }
        total += sum / static_cast<real>(fa[l].size());
    }
    return total / static_cast<real>(fa.size());
}

real feature_distance_grad(FeatureExtractor& fe, const Tensor& a, const Tensor& b, Tensor& ga) {
    require(a.same_shape(b), Status::InvalidArgument, "feature distance shape mismatch");
    std::vector<Tensor> fb = fe.features(b);
    std::vector<Tensor> fa = fe.features(a);  // caches now refer to a
    const real nf = static_cast<real>(fa.size());
    real total = 0.0;
    std::vector<Tensor> gfeats;
    gfeats.reserve(fa.size());
    for (std::size_t l = 0; l < fa.size(); ++l) {
        real sum = 0.0;
        Tensor g = Tensor::zeros_like(fa[l]);
        const real scale = 2.0 / (static_cast<real>(fa[l].size()) * nf);
        for (std::size_t i = 0; i < fa[l].size(); ++i) {
            real d = fa[l][i] - fb[l][i];
            sum += d * d;
            g[i] = scale * d;
        }
        total += sum / static_cast<real>(fa[l].size());
        gfeats.push_back(std::move(g));
    }
    ga = fe.grad_input(gfeats);
    return total / nf;
}

}  // namespace bsldm::metrics
