// Command-line front end. Talks to the toolkit exclusively through the C API
// so the shared library surface stays honest.

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bsldm/bsldm.h"

namespace {

struct SweepAxis {
    std::string key;
    std::vector<std::string> values;
};

// "sampler.omega=0.001,0.003,0.005"
SweepAxis parse_sweep(const std::string& spec) {
    auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 >= spec.size())
        throw CLI::ValidationError("--sweep", "expected key=v1,v2,...");
    SweepAxis axis;
    axis.key = spec.substr(0, eq);
    std::string rest = spec.substr(eq + 1);
    size_t start = 0;
    while (start <= rest.size()) {
        size_t comma = rest.find(',', start);
        std::string v = rest.substr(start, comma == std::string::npos ? comma : comma - start);
        if (!v.empty()) axis.values.push_back(v);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (axis.values.empty()) throw CLI::ValidationError("--sweep", "no values given");
    return axis;
}

std::string sanitize_tag(const std::string& s) {
    std::string out;
    for (char c : s)
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' ||
                c == '_')
                   ? c
                   : '-';
    return out;
}

int die(int rc) {
    std::fprintf(stderr, "error: %s\n", bsldm_last_error());
    return rc;
}

int apply_kv(bsldm_config* cfg, const std::string& kv) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) {
        std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
        return BSLDM_E_INVALID_ARGUMENT;
    }
    return bsldm_config_set(cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bsldm: latent-diffusion bone suppression for chest radiographs"};
    app.require_subcommand(1);

    std::string config_path, profile, sweep_spec;
    std::vector<std::string> sets;
    app.add_option("--config", config_path, "INI config file; defaults are built in");
    app.add_option("--profile", profile, "named profile (desk = small-scale verification)");
    app.add_option("--set", sets, "override a config key, key=value; repeatable")
        ->take_all();
    app.add_option("--sweep", sweep_spec,
                   "run the command once per value: key=v1,v2,...; outputs are tagged");

    bool force = false, trace = false;
    int synthetic_n = -1, image_size = -1;
    std::string stage, samples_dir;

    CLI::App* c_prepare = app.add_subcommand("prepare", "build the processed corpus + manifest");
    c_prepare->add_flag("--force", force, "rebuild even if the corpus exists");
    c_prepare->add_option("--synthetic", synthetic_n, "generate N synthetic pairs");
    c_prepare->add_option("--size", image_size, "target image size");

    CLI::App* c_train = app.add_subcommand("train", "train a stage");
    c_train->add_option("stage", stage, "vqgan | ldm")->required();

    CLI::App* c_sample = app.add_subcommand("sample", "sample the test split");
    c_sample->add_flag("--trace", trace, "write per-step latent statistics");

    CLI::App* c_eval = app.add_subcommand("evaluate", "score predictions against ground truth");
    c_eval->add_option("--samples", samples_dir, "prediction directory (default: samples/)");

    CLI::App* c_ablate = app.add_subcommand("ablate", "offset-noise x thresholding grid");
    CLI::App* c_psd = app.add_subcommand("psd", "power spectral density report");
    CLI::App* c_config = app.add_subcommand("config", "print the effective configuration");

    CLI11_PARSE(app, argc, argv);

    bsldm_config* cfg = nullptr;
    if (!config_path.empty()) {
        cfg = bsldm_config_load(config_path.c_str());
        if (!cfg) return die(BSLDM_E_IO);
    } else {
        cfg = bsldm_config_new();
    }

    int rc = BSLDM_OK;
    if (!profile.empty()) rc = bsldm_config_apply_profile(cfg, profile.c_str());
    for (const auto& kv : sets) {
        if (rc) break;
        rc = apply_kv(cfg, kv);
    }
    if (!rc && c_prepare->parsed() && synthetic_n >= 0)
        rc = bsldm_config_set(cfg, "data.synthetic_n", std::to_string(synthetic_n).c_str());
    if (!rc && c_prepare->parsed() && image_size > 0)
        rc = bsldm_config_set(cfg, "data.image_size", std::to_string(image_size).c_str());
    if (rc) {
        bsldm_config_free(cfg);
        return die(rc);
    }

    auto run_one = [&]() -> int {
        if (c_prepare->parsed()) return bsldm_prepare(cfg, force ? 1 : 0);
        if (c_train->parsed()) return bsldm_train(cfg, stage.c_str());
        if (c_sample->parsed()) return bsldm_sample(cfg, trace ? 1 : 0);
        if (c_eval->parsed())
            return bsldm_evaluate(cfg, samples_dir.empty() ? nullptr : samples_dir.c_str());
        if (c_ablate->parsed()) return bsldm_ablate(cfg);
        if (c_psd->parsed()) return bsldm_psd(cfg);
        if (c_config->parsed()) {
            std::vector<char> buf(16384);
            int drc = bsldm_config_dump(cfg, buf.data(), buf.size());
            if (drc == BSLDM_OK) std::fputs(buf.data(), stdout);
            return drc;
        }
        return BSLDM_E_INVALID_ARGUMENT;
    };

    if (sweep_spec.empty()) {
        rc = run_one();
    } else {
        SweepAxis axis;
        try {
            axis = parse_sweep(sweep_spec);
        } catch (const CLI::Error& e) {
            bsldm_config_free(cfg);
            std::fprintf(stderr, "error: %s\n", e.what());
            return BSLDM_E_INVALID_ARGUMENT;
        }
        for (const auto& v : axis.values) {
            rc = bsldm_config_set(cfg, axis.key.c_str(), v.c_str());
            if (!rc) {
                std::string tag = sanitize_tag(axis.key + "-" + v);
                rc = bsldm_config_set(cfg, "run.tag", tag.c_str());
            }
            if (!rc) {
                std::printf("[sweep] %s = %s\n", axis.key.c_str(), v.c_str());
                rc = run_one();
            }
            if (rc) break;
        }
    }

    bsldm_config_free(cfg);
    if (rc) return die(rc);
    return 0;
}
