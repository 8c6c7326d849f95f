#pragma once

#include <string>
#include <vector>

#include "metrics/metrics.hpp"
#include "pipeline/config.hpp"

namespace bsldm::pipeline {

// Canonical layout under the output root. Directories are created on demand.
struct RunPaths {
    std::string root;
    std::string data_dir, manifest, prepare_meta;
    std::string ck_dir, vqgan_ck, ldm_ck, ldm_offset0_ck;
    std::string log_dir;
    std::string sample_dir, ablate_sample_dir;
    std::string report_dir;

    static RunPaths from(const ExperimentConfig& cfg);
};

// Builds the processed corpus and manifest. A second run against the same
// config is a no-op; a config change without `force` is an error.
void cmd_prepare(const ExperimentConfig& cfg, bool force);

// stage is "vqgan" or "ldm". Resumes from the stage checkpoint when present;
// "ldm" requires a finished compressor checkpoint.
void cmd_train(const ExperimentConfig& cfg, const std::string& stage);

// Samples the test split with the configured threshold policy; per-image seeds
// derive from the run seed and the image id. `trace` additionally writes
// per-step latent statistics for the first batch.
void cmd_sample(const ExperimentConfig& cfg, bool trace);

struct EvalSummary {
    int count = 0;
    std::string extractor;
    metrics::SummaryStat bsr, mse, psnr, lpips, mean_diff;
};

// Scores a directory of predictions against the manifest's test split and
// writes <report_stem>.csv (per image) and <report_stem>.json (summary).
// Predictions and manifest entries must match one-to-one; leftovers on either
// side are listed in the error.
EvalSummary evaluate_dir(const ExperimentConfig& cfg, const std::string& sample_dir,
                         const std::string& report_stem);

// Default evaluation of the main sample directory into reports/metrics.*
EvalSummary cmd_evaluate(const ExperimentConfig& cfg);

// The 2x4 grid of offset noise {off,on} x threshold {none,static,dynamic,
// temporal} under shared seeds. Trains whatever is missing, samples and scores
// each cell, and writes the combined table. Finished cells are skipped on
// rerun.
void cmd_ablate(const ExperimentConfig& cfg);

// Radially averaged power spectra of the prepared soft-tissue images next to
// a white-noise reference of the same size and count.
void cmd_psd(const ExperimentConfig& cfg);

}  // namespace bsldm::pipeline
