#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "core/image.hpp"

namespace bsldm::data {

enum class Split { Train = 0, Val = 1, Test = 2 };
std::string split_name(Split s);
Split split_from_name(const std::string& name);

enum class NormalizeMode { MinMax, Fixed };

struct PreprocessConfig {
    int target_size = 1024;
    bool clahe_enabled = true;
    real clahe_clip = 2.0;
    int clahe_grid = 8;
    NormalizeMode normalize = NormalizeMode::MinMax;
};

// CLAHE -> resize (area filter when shrinking) -> map to [-1,1]. MinMax maps
// the per-image range onto [-1,1] exactly (constant images go to 0); Fixed
// assumes [0,1] input and applies 2v-1, preserving absolute brightness.
Image preprocess(const Image& raw, const PreprocessConfig& cfg);

// v -> (1-v)^gamma on the [0,1] working range; gamma=1 is the plain inversion.
Image jsrt_to_negative(const Image& img, real gamma);

// Deterministic shuffle then contiguous assignment. Counts are floored and the
// remainder goes to the splits with the largest fractional part (ties resolved
// train < val < test).
std::vector<Split> split_dataset(int n, const std::array<real, 3>& ratios, std::uint64_t seed);
std::array<int, 3> split_counts(int n, const std::array<real, 3>& ratios);

struct ManifestRow {
    std::string id;
    Split split = Split::Train;
    std::string cxr_path;
    std::string tissue_path;
    std::string bone_path;  // empty when no ground-truth bone image exists
};

void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> read_manifest(const std::string& path);

}  // namespace bsldm::data
