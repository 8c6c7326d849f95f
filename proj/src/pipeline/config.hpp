#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/ini.hpp"
#include "core/tensor.hpp"

namespace bsldm::pipeline {

// One config file drives every command. Defaults are the published training
// constants; the desk profile swaps in a small-scale variant of the same
// pipeline for fast verification runs.
struct ExperimentConfig {
    struct Data {
        std::string raw_dir;        // cxr/ and tissue/ subdirs; empty for synthetic
        int synthetic_n = 0;        // > 0 generates the paired toy corpus
        real bone_amplitude = 1.0;  // synthetic bone strength
        int image_size = 1024;
        bool clahe = true;
        real clahe_clip = 2.0;
        int clahe_grid = 8;
        std::string normalize = "minmax";  // or "fixed"
        bool jsrt_negative = false;
        real jsrt_gamma = 0.8;
        real ratio_train = 0.8, ratio_val = 0.1, ratio_test = 0.1;
        std::string blacklist;  // optional file with one excluded id per line
    } data;

    struct Compressor {
        int r = 8;
        int latent_channels = 3;
        int codebook_size = 1024;
        int base_channels = 64;
        int num_res_blocks = 1;
        int norm_groups = 8;
        int disc_base_channels = 64;
        real lambda_l1 = 1.0;
        real lambda_per = 0.001;
        real lambda_adv = 0.01;
        real lambda_qua = 1.0;
        real beta_commit = 0.25;
        int epochs = 1000;
        int batch_size = 4;
        real lr = 0.0001;
        real disc_lr = 0.0005;
        int disc_warmup_steps = 10000;
        int lr_step_epochs = 0;
        real lr_gamma = 0.5;
        std::string perceptual = "seeded-random-v1";
    } compressor;

    struct Estimator {
        int base_channels = 64;
        std::vector<int> channel_mults{1, 2, 4};
        std::vector<int> attention_resolutions{16, 8};
        int num_res_blocks = 2;
        int norm_groups = 8;
        int temb_dim = 256;
        int epochs = 2500;
        int batch_size = 4;
        real lr = 0.0002;
        real weight_decay = 0.01;
        real ema_decay = 0.995;
        int lr_step_epochs = 1000;
        real lr_gamma = 0.5;
    } estimator;

    struct Schedule {
        int T = 1000;
        real beta_min = 0.008;
        real beta_max = 0.02;
        real offset_lambda = 0.1;
    } schedule;

    struct Sampler {
        std::string threshold = "temporal";
        real omega = 0.003;
        real intercept = 1.4;
        real percentile = 99.5;
        int batch_size = 64;  // images sampled per reverse-diffusion pass
    } sampler;

    struct Metrics {
        std::string extractor = "seeded-random-v1";
        int psd_bins = 201;
    } metrics;

    struct Run {
        std::uint64_t seed = 1234;
        std::string output_root = "runs/default";
        std::string tag;  // suffixes sample/report dirs; sweeps set this per value
    } run;

    static ExperimentConfig defaults() { return {}; }

    // "desk": 64x64 images, r=4, shrunken networks, shortened schedules.
    void apply_profile(const std::string& name);

    void load_ini(const IniFile& ini);
    IniFile to_ini() const;
    static ExperimentConfig from_file(const std::string& path);
    void save(const std::string& path) const;

    // run.output_root unless the BSLDM_OUTPUT_ROOT env var overrides it
    std::string output_root() const;

    // Stable hex digests over the fields an artifact depends on; stored in
    // manifests/checkpoints and checked before artifacts are combined.
    // config_fingerprint covers everything except the output location.
    std::string config_fingerprint() const;
    std::string data_fingerprint() const;
    std::string compressor_fingerprint() const;
    std::string estimator_fingerprint() const;
    std::string schedule_fingerprint() const;
};

std::vector<int> parse_int_list(const std::string& csv);
std::string join_int_list(const std::vector<int>& xs);

}  // namespace bsldm::pipeline
