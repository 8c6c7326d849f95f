#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/image.hpp"

namespace bsldm::data {

struct SyntheticConfig {
    int size = 64;
    real bone_amplitude = 1.0;  // scales all band amplitudes; 0 removes bones
};

struct SyntheticPair {
    std::string id;
    Image cxr;
    Image soft;
    Image bone;  // ground truth overlay, kept for BSR evaluation
};

// Paired corpus in the [0,1] working range: soft tissue is a smooth blob field
// with a per-image base brightness, bone is a stack of oriented bands, and
// cxr = clamp(soft + bone). Per-image seeds derive from `seed`, so a pair's
// content depends only on (seed, index).
std::vector<SyntheticPair> generate_synthetic_pairs(int n, const SyntheticConfig& cfg,
                                                    std::uint64_t seed);

}  // namespace bsldm::data
