#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace bsldm {

// Deterministic random source. Gaussian draws use an explicit Box-Muller
// transform rather than std::normal_distribution, whose output sequence is
// implementation-defined. All randomness in the project flows through
// explicitly seeded instances of this class.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * (1.0 / 9007199254740992.0);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). n must be positive.
    std::int64_t uniform_int(std::int64_t n) {
        auto v = static_cast<std::int64_t>(uniform() * static_cast<double>(n));
        return v < n ? v : n - 1;
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    void normal_fill(double* dst, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) dst[i] = normal();
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Deterministic Fisher-Yates permutation of 0..n-1 (std::shuffle's draw
// sequence is implementation-defined, so it is avoided).
inline std::vector<int> shuffled_indices(int n, Rng& rng) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (int i = n - 1; i > 0; --i) {
        auto j = static_cast<std::size_t>(rng.uniform_int(i + 1));
        std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
    }
    return idx;
}

// splitmix64 finalizer; used to derive independent stream seeds from a base
// seed and a stream tag so that e.g. per-image sampling noise does not depend
// on batch composition.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace bsldm
