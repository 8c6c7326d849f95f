#include "vq/codebook.hpp"

namespace bsldm::vq {

QuantizeResult quantize(const Tensor& z, const Codebook& cb) {
    require(z.ndim() == 4, Status::InvalidArgument, "quantize expects NCHW latents");
    require(z.dim(1) == cb.d(), Status::InvalidArgument,
            "latent channel count must equal code dimensionality");
    const int n = z.dim(0), c = z.dim(1), h = z.dim(2), w = z.dim(3);
    const int K = cb.K();
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const real* codes = cb.codes.value.data();

    QuantizeResult out;
    out.z_q = Tensor::zeros_like(z);
    out.indices.resize(static_cast<std::size_t>(n) * plane);

    real dist_sum = 0.0;
    std::size_t site = 0;
    for (int i = 0; i < n; ++i) {
        const real* zn = z.data() + z.idx(i, 0, 0, 0);
        real* qn = out.z_q.data() + out.z_q.idx(i, 0, 0, 0);
        for (std::size_t p = 0; p < plane; ++p, ++site) {
            int best = 0;
            real best_d = 0.0;
            for (int k = 0; k < K; ++k) {
                real d2 = 0.0;
                const real* ck = codes + static_cast<std::size_t>(k) * c;
                for (int j = 0; j < c; ++j) {
                    real d = zn[static_cast<std::size_t>(j) * plane + p] - ck[j];
                    d2 += d * d;
                }
                if (k == 0 || d2 < best_d) {  // strict <: ties keep the lowest index
                    best_d = d2;
                    best = k;
                }
            }
            out.indices[site] = best;
            const real* cb_row = codes + static_cast<std::size_t>(best) * c;
            for (int j = 0; j < c; ++j) qn[static_cast<std::size_t>(j) * plane + p] = cb_row[j];
            dist_sum += best_d;
        }
    }
    const real mean_d2 = dist_sum / static_cast<real>(z.size());
    out.codebook_term = mean_d2;
    out.commit_term = mean_d2;
    return out;
}

void accumulate_quantize_grads(const Tensor& z, const QuantizeResult& q, const Tensor& g_zq,
                               real codebook_scale, real commit_scale, Tensor& gz,
                               Tensor& gcodes) {
    require(z.same_shape(q.z_q) && z.same_shape(g_zq), Status::InvalidArgument,
            "quantize gradient shape mismatch");
    require(gcodes.ndim() == 2, Status::InvalidArgument, "codebook gradient must be (K, d)");
    const int n = z.dim(0), c = z.dim(1), h = z.dim(2), w = z.dim(3);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const real inv = 2.0 / static_cast<real>(z.size());

    gz = g_zq;  // straight-through
    std::size_t site = 0;
    for (int i = 0; i < n; ++i) {
        const std::size_t base = z.idx(i, 0, 0, 0);
        for (std::size_t p = 0; p < plane; ++p, ++site) {
            const int k = q.indices[site];
            for (int j = 0; j < c; ++j) {
                const std::size_t at = base + static_cast<std::size_t>(j) * plane + p;
                const real diff = z[at] - q.z_q[at];
                gz[at] += commit_scale * inv * diff;
                gcodes[static_cast<std::size_t>(k * c + j)] -= codebook_scale * inv * diff;
            }
        }
    }
}

}  // namespace bsldm::vq
