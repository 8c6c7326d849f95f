#include "bsldm/bsldm.h"

#include <cstring>
#include <filesystem>
#include <string>

#include "core/error.hpp"
#include "pipeline/config.hpp"
#include "pipeline/runner.hpp"

using bsldm::Error;
using bsldm::Status;
using bsldm::pipeline::ExperimentConfig;
using bsldm::pipeline::RunPaths;

struct bsldm_config {
    ExperimentConfig cfg;
};

namespace {

thread_local std::string g_last_error;

int status_code(Status s) {
    switch (s) {
        case Status::Ok: return BSLDM_OK;
        case Status::InvalidArgument: return BSLDM_E_INVALID_ARGUMENT;
        case Status::Io: return BSLDM_E_IO;
        case Status::Precondition: return BSLDM_E_PRECONDITION;
        case Status::Numeric: return BSLDM_E_NUMERIC;
        case Status::Internal: return BSLDM_E_INTERNAL;
    }
    return BSLDM_E_INTERNAL;
}

template <typename Fn>
int guarded(Fn&& fn) {
    try {
        fn();
        return BSLDM_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return status_code(e.status());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return BSLDM_E_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return BSLDM_E_INTERNAL;
    }
}

int check_cfg(const bsldm_config* cfg) {
    if (cfg) return BSLDM_OK;
    g_last_error = "null config";
    return BSLDM_E_INVALID_ARGUMENT;
}

}  // namespace

extern "C" {

const char* bsldm_version(void) { return "0.1.0"; }

const char* bsldm_last_error(void) { return g_last_error.c_str(); }

bsldm_config* bsldm_config_new(void) { return new bsldm_config{}; }

bsldm_config* bsldm_config_load(const char* path) {
    bsldm_config* out = nullptr;
    int rc = guarded([&] {
        bsldm::require(path != nullptr, Status::InvalidArgument, "null config path");
        out = new bsldm_config{ExperimentConfig::from_file(path)};
    });
    (void)rc;
    return out;
}

void bsldm_config_free(bsldm_config* cfg) { delete cfg; }

int bsldm_config_apply_profile(bsldm_config* cfg, const char* name) {
    int rc = check_cfg(cfg);
    if (rc) return rc;
    return guarded([&] {
        bsldm::require(name != nullptr, Status::InvalidArgument, "null profile name");
        cfg->cfg.apply_profile(name);
    });
}

int bsldm_config_set(bsldm_config* cfg, const char* dotted_key, const char* value) {
    int rc = check_cfg(cfg);
    if (rc) return rc;
    return guarded([&] {
        bsldm::require(dotted_key && value, Status::InvalidArgument, "null key or value");
        bsldm::require(cfg->cfg.to_ini().has(dotted_key), Status::InvalidArgument,
                       std::string("unknown config key: ") + dotted_key);
        bsldm::IniFile one;
        one.set(dotted_key, value);
        cfg->cfg.load_ini(one);
    });
}

int bsldm_config_get(const bsldm_config* cfg, const char* dotted_key, char* buf,
                     unsigned long buf_len) {
    int rc = check_cfg(cfg);
    if (rc) return rc;
    return guarded([&] {
        bsldm::require(dotted_key && buf && buf_len > 0, Status::InvalidArgument,
                       "bad key or buffer");
        auto v = cfg->cfg.to_ini().get(dotted_key);
        bsldm::require(v.has_value(), Status::InvalidArgument,
                       std::string("unknown config key: ") + dotted_key);
        bsldm::require(v->size() < buf_len, Status::InvalidArgument,
                       "buffer too small for value of " + std::string(dotted_key));
        std::memcpy(buf, v->c_str(), v->size() + 1);
    });
}

int bsldm_config_dump(const bsldm_config* cfg, char* buf, unsigned long buf_len) {
    int rc = check_cfg(cfg);
    if (rc) return rc;
    return guarded([&] {
        bsldm::require(buf && buf_len > 0, Status::InvalidArgument, "bad buffer");
        std::string text = cfg->cfg.to_ini().serialize();
        bsldm::require(text.size() < buf_len, Status::InvalidArgument,
                       "buffer too small for config dump");
        std::memcpy(buf, text.c_str(), text.size() + 1);
    });
}

int bsldm_config_save(const bsldm_config* cfg, const char* path) {
    int rc = check_cfg(cfg);
    if (rc) return rc;
    return guarded([&] {
        bsldm::require(path != nullptr, Status::InvalidArgument, "null path");
        cfg->cfg.save(path);
    });
}

int bsldm_prepare(const bsldm_config* cfg, int force) {
    int rc = check_cfg(cfg);
    if (rc) return rc;
    return guarded([&] { bsldm::pipeline::cmd_prepare(cfg->cfg, force != 0); });
}

int bsldm_train(const bsldm_config* cfg, const char* stage) {
    int rc = check_cfg(cfg);
    if (rc) return rc;
    return guarded([&] {
        bsldm::require(stage != nullptr, Status::InvalidArgument, "null training stage");
        bsldm::pipeline::cmd_train(cfg->cfg, stage);
    });
}

int bsldm_sample(const bsldm_config* cfg, int trace) {
    int rc = check_cfg(cfg);
    if (rc) return rc;
    return guarded([&] { bsldm::pipeline::cmd_sample(cfg->cfg, trace != 0); });
}

int bsldm_evaluate(const bsldm_config* cfg, const char* samples_dir) {
    int rc = check_cfg(cfg);
    if (rc) return rc;
    return guarded([&] {
        if (!samples_dir) {
            bsldm::pipeline::cmd_evaluate(cfg->cfg);
        } else {
            RunPaths p = RunPaths::from(cfg->cfg);
            std::filesystem::path dir(samples_dir);
            if (dir.filename().empty()) dir = dir.parent_path();  // trailing slash
            std::string stem = (std::filesystem::path(p.report_dir) /
                                ("eval-" + dir.filename().string()))
                                   .string();
            bsldm::pipeline::evaluate_dir(cfg->cfg, samples_dir, stem);
        }
    });
}

int bsldm_ablate(const bsldm_config* cfg) {
    int rc = check_cfg(cfg);
    if (rc) return rc;
    return guarded([&] { bsldm::pipeline::cmd_ablate(cfg->cfg); });
}

int bsldm_psd(const bsldm_config* cfg) {
    int rc = check_cfg(cfg);
    if (rc) return rc;
    return guarded([&] { bsldm::pipeline::cmd_psd(cfg->cfg); });
}

}  // extern "C"
