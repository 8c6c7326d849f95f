#pragma once

#include <cmath>
#include <vector>

#include "core/tensor.hpp"

namespace bsldm::nn {

// Transformer-style sinusoidal embedding of integer timesteps: first half
// sin, second half cos, frequencies geometric from 1 down to 1/10000.
inline Tensor sinusoidal_embedding(const std::vector<int>& steps, int dim) {
    require(dim >= 2 && dim % 2 == 0, Status::InvalidArgument,
            "sinusoidal embedding dim must be even and >= 2");
    const int n = static_cast<int>(steps.size());
    const int half = dim / 2;
    Tensor out({n, dim});
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < half; ++j) {
            real freq = half > 1 ? std::exp(-std::log(10000.0) * j / (half - 1)) : 1.0;
            real a = steps[i] * freq;
            out[static_cast<std::size_t>(i) * dim + j] = std::sin(a);
            out[static_cast<std::size_t>(i) * dim + half + j] = std::cos(a);
        }
    }
    return out;
}

}  // namespace bsldm::nn
