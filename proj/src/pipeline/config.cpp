#include "pipeline/config.hpp"

#include <charconv>
#include <cstdlib>
#include <sstream>

#include "core/error.hpp"
#include "core/fingerprint.hpp"

namespace bsldm::pipeline {

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        size_t a = item.find_first_not_of(" \t");
        if (a == std::string::npos) continue;
        size_t b = item.find_last_not_of(" \t");
        out.push_back(std::stoi(item.substr(a, b - a + 1)));
    }
    require(!out.empty(), Status::InvalidArgument, "empty int list: '" + csv + "'");
    return out;
}

std::string join_int_list(const std::vector<int>& xs) {
    std::string s;
    for (size_t i = 0; i < xs.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(xs[i]);
    }
    return s;
}

void ExperimentConfig::apply_profile(const std::string& name) {
    if (name.empty() || name == "full") return;
    require(name == "desk", Status::InvalidArgument, "unknown profile: " + name);

    data.image_size = 64;
    data.normalize = "fixed";  // synthetic corpus is already calibrated to [0,1]
    data.clahe = false;

    compressor.r = 4;
    compressor.base_channels = 6;
    compressor.norm_groups = 2;
    compressor.disc_base_channels = 8;
    compressor.epochs = 60;
    compressor.disc_warmup_steps = 2000;
    compressor.lr_step_epochs = 40;

    estimator.base_channels = 16;
    estimator.channel_mults = {1, 2, 2};
    estimator.attention_resolutions = {8, 4};
    estimator.num_res_blocks = 1;
    estimator.norm_groups = 4;
    estimator.temb_dim = 32;
    estimator.epochs = 150;
    estimator.lr_step_epochs = 60;

    schedule.T = 200;

    sampler.batch_size = 64;
    metrics.psd_bins = 16;
}

namespace {

real getf(const IniFile& ini, const std::string& key, real dflt) {
    auto v = ini.get(key);
    return v ? std::stod(*v) : dflt;
}
int geti(const IniFile& ini, const std::string& key, int dflt) {
    auto v = ini.get(key);
    return v ? std::stoi(*v) : dflt;
}
std::uint64_t getu(const IniFile& ini, const std::string& key, std::uint64_t dflt) {
    auto v = ini.get(key);
    return v ? std::stoull(*v) : dflt;
}
std::string gets(const IniFile& ini, const std::string& key, const std::string& dflt) {
    auto v = ini.get(key);
    return v ? *v : dflt;
}
bool getb(const IniFile& ini, const std::string& key, bool dflt) {
    if (!ini.has(key)) return dflt;
    std::string v = *ini.get(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail(Status::InvalidArgument, "bad boolean for " + key + ": " + v);
}

std::string fmt(real v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);  // shortest exact form
    return std::string(buf, res.ptr);
}

}  // namespace

void ExperimentConfig::load_ini(const IniFile& ini) {
    data.raw_dir = gets(ini, "data.raw_dir", data.raw_dir);
    data.synthetic_n = geti(ini, "data.synthetic_n", data.synthetic_n);
    data.bone_amplitude = getf(ini, "data.bone_amplitude", data.bone_amplitude);
    data.image_size = geti(ini, "data.image_size", data.image_size);
    data.clahe = getb(ini, "data.clahe", data.clahe);
    data.clahe_clip = getf(ini, "data.clahe_clip", data.clahe_clip);
    data.clahe_grid = geti(ini, "data.clahe_grid", data.clahe_grid);
    data.normalize = gets(ini, "data.normalize", data.normalize);
    data.jsrt_negative = getb(ini, "data.jsrt_negative", data.jsrt_negative);
    data.jsrt_gamma = getf(ini, "data.jsrt_gamma", data.jsrt_gamma);
    data.ratio_train = getf(ini, "data.ratio_train", data.ratio_train);
    data.ratio_val = getf(ini, "data.ratio_val", data.ratio_val);
    data.ratio_test = getf(ini, "data.ratio_test", data.ratio_test);
    data.blacklist = gets(ini, "data.blacklist", data.blacklist);

    compressor.r = geti(ini, "compressor.r", compressor.r);
    compressor.latent_channels = geti(ini, "compressor.latent_channels", compressor.latent_channels);
    compressor.codebook_size = geti(ini, "compressor.codebook_size", compressor.codebook_size);
    compressor.base_channels = geti(ini, "compressor.base_channels", compressor.base_channels);
    compressor.num_res_blocks = geti(ini, "compressor.num_res_blocks", compressor.num_res_blocks);
    compressor.norm_groups = geti(ini, "compressor.norm_groups", compressor.norm_groups);
    compressor.disc_base_channels = geti(ini, "compressor.disc_base_channels", compressor.disc_base_channels);
    compressor.lambda_l1 = getf(ini, "compressor.lambda_l1", compressor.lambda_l1);
    compressor.lambda_per = getf(ini, "compressor.lambda_per", compressor.lambda_per);
    compressor.lambda_adv = getf(ini, "compressor.lambda_adv", compressor.lambda_adv);
    compressor.lambda_qua = getf(ini, "compressor.lambda_qua", compressor.lambda_qua);
    compressor.beta_commit = getf(ini, "compressor.beta_commit", compressor.beta_commit);
    compressor.epochs = geti(ini, "compressor.epochs", compressor.epochs);
    compressor.batch_size = geti(ini, "compressor.batch_size", compressor.batch_size);
    compressor.lr = getf(ini, "compressor.lr", compressor.lr);
    compressor.disc_lr = getf(ini, "compressor.disc_lr", compressor.disc_lr);
    compressor.disc_warmup_steps = geti(ini, "compressor.disc_warmup_steps", compressor.disc_warmup_steps);
    compressor.lr_step_epochs = geti(ini, "compressor.lr_step_epochs", compressor.lr_step_epochs);
    compressor.lr_gamma = getf(ini, "compressor.lr_gamma", compressor.lr_gamma);
    compressor.perceptual = gets(ini, "compressor.perceptual", compressor.perceptual);

    estimator.base_channels = geti(ini, "estimator.base_channels", estimator.base_channels);
    if (auto v = ini.get("estimator.channel_mults"))
        estimator.channel_mults = parse_int_list(*v);
    if (auto v = ini.get("estimator.attention_resolutions"))
        estimator.attention_resolutions = parse_int_list(*v);
    estimator.num_res_blocks = geti(ini, "estimator.num_res_blocks", estimator.num_res_blocks);
    estimator.norm_groups = geti(ini, "estimator.norm_groups", estimator.norm_groups);
    estimator.temb_dim = geti(ini, "estimator.temb_dim", estimator.temb_dim);
    estimator.epochs = geti(ini, "estimator.epochs", estimator.epochs);
    estimator.batch_size = geti(ini, "estimator.batch_size", estimator.batch_size);
    estimator.lr = getf(ini, "estimator.lr", estimator.lr);
    estimator.weight_decay = getf(ini, "estimator.weight_decay", estimator.weight_decay);
    estimator.ema_decay = getf(ini, "estimator.ema_decay", estimator.ema_decay);
    estimator.lr_step_epochs = geti(ini, "estimator.lr_step_epochs", estimator.lr_step_epochs);
    estimator.lr_gamma = getf(ini, "estimator.lr_gamma", estimator.lr_gamma);

    schedule.T = geti(ini, "schedule.T", schedule.T);
    schedule.beta_min = getf(ini, "schedule.beta_min", schedule.beta_min);
    schedule.beta_max = getf(ini, "schedule.beta_max", schedule.beta_max);
    schedule.offset_lambda = getf(ini, "schedule.offset_lambda", schedule.offset_lambda);

    sampler.threshold = gets(ini, "sampler.threshold", sampler.threshold);
    sampler.omega = getf(ini, "sampler.omega", sampler.omega);
    sampler.intercept = getf(ini, "sampler.intercept", sampler.intercept);
    sampler.percentile = getf(ini, "sampler.percentile", sampler.percentile);
    sampler.batch_size = geti(ini, "sampler.batch_size", sampler.batch_size);

    metrics.extractor = gets(ini, "metrics.extractor", metrics.extractor);
    metrics.psd_bins = geti(ini, "metrics.psd_bins", metrics.psd_bins);

    run.seed = getu(ini, "run.seed", run.seed);
    run.output_root = gets(ini, "run.output_root", run.output_root);
    run.tag = gets(ini, "run.tag", run.tag);
}

IniFile ExperimentConfig::to_ini() const {
    IniFile ini;
    ini.set("data.raw_dir", data.raw_dir);
    ini.set("data.synthetic_n", std::to_string(data.synthetic_n));
    ini.set("data.bone_amplitude", fmt(data.bone_amplitude));
    ini.set("data.image_size", std::to_string(data.image_size));
    ini.set("data.clahe", data.clahe ? "true" : "false");
    ini.set("data.clahe_clip", fmt(data.clahe_clip));
    ini.set("data.clahe_grid", std::to_string(data.clahe_grid));
    ini.set("data.normalize", data.normalize);
    ini.set("data.jsrt_negative", data.jsrt_negative ? "true" : "false");
    ini.set("data.jsrt_gamma", fmt(data.jsrt_gamma));
    ini.set("data.ratio_train", fmt(data.ratio_train));
    ini.set("data.ratio_val", fmt(data.ratio_val));
    ini.set("data.ratio_test", fmt(data.ratio_test));
    ini.set("data.blacklist", data.blacklist);

    ini.set("compressor.r", std::to_string(compressor.r));
    ini.set("compressor.latent_channels", std::to_string(compressor.latent_channels));
    ini.set("compressor.codebook_size", std::to_string(compressor.codebook_size));
    ini.set("compressor.base_channels", std::to_string(compressor.base_channels));
    ini.set("compressor.num_res_blocks", std::to_string(compressor.num_res_blocks));
    ini.set("compressor.norm_groups", std::to_string(compressor.norm_groups));
    ini.set("compressor.disc_base_channels", std::to_string(compressor.disc_base_channels));
    ini.set("compressor.lambda_l1", fmt(compressor.lambda_l1));
    ini.set("compressor.lambda_per", fmt(compressor.lambda_per));
    ini.set("compressor.lambda_adv", fmt(compressor.lambda_adv));
    ini.set("compressor.lambda_qua", fmt(compressor.lambda_qua));
    ini.set("compressor.beta_commit", fmt(compressor.beta_commit));
    ini.set("compressor.epochs", std::to_string(compressor.epochs));
    ini.set("compressor.batch_size", std::to_string(compressor.batch_size));
    ini.set("compressor.lr", fmt(compressor.lr));
    ini.set("compressor.disc_lr", fmt(compressor.disc_lr));
    ini.set("compressor.disc_warmup_steps", std::to_string(compressor.disc_warmup_steps));
    ini.set("compressor.lr_step_epochs", std::to_string(compressor.lr_step_epochs));
    ini.set("compressor.lr_gamma", fmt(compressor.lr_gamma));
    ini.set("compressor.perceptual", compressor.perceptual);

    ini.set("estimator.base_channels", std::to_string(estimator.base_channels));
    ini.set("estimator.channel_mults", join_int_list(estimator.channel_mults));
    ini.set("estimator.attention_resolutions", join_int_list(estimator.attention_resolutions));
    ini.set("estimator.num_res_blocks", std::to_string(estimator.num_res_blocks));
    ini.set("estimator.norm_groups", std::to_string(estimator.norm_groups));
    ini.set("estimator.temb_dim", std::to_string(estimator.temb_dim));
    ini.set("estimator.epochs", std::to_string(estimator.epochs));
    ini.set("estimator.batch_size", std::to_string(estimator.batch_size));
    ini.set("estimator.lr", fmt(estimator.lr));
    ini.set("estimator.weight_decay", fmt(estimator.weight_decay));
    ini.set("estimator.ema_decay", fmt(estimator.ema_decay));
    ini.set("estimator.lr_step_epochs", std::to_string(estimator.lr_step_epochs));
    ini.set("estimator.lr_gamma", fmt(estimator.lr_gamma));

    ini.set("schedule.T", std::to_string(schedule.T));
    ini.set("schedule.beta_min", fmt(schedule.beta_min));
    ini.set("schedule.beta_max", fmt(schedule.beta_max));
    ini.set("schedule.offset_lambda", fmt(schedule.offset_lambda));

    ini.set("sampler.threshold", sampler.threshold);
    ini.set("sampler.omega", fmt(sampler.omega));
    ini.set("sampler.intercept", fmt(sampler.intercept));
    ini.set("sampler.percentile", fmt(sampler.percentile));
    ini.set("sampler.batch_size", std::to_string(sampler.batch_size));

    ini.set("metrics.extractor", metrics.extractor);
    ini.set("metrics.psd_bins", std::to_string(metrics.psd_bins));

    ini.set("run.seed", std::to_string(run.seed));
    ini.set("run.output_root", run.output_root);
    ini.set("run.tag", run.tag);
    return ini;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    ExperimentConfig cfg;
    cfg.load_ini(IniFile::load(path));
    return cfg;
}

void ExperimentConfig::save(const std::string& path) const { to_ini().save(path); }

std::string ExperimentConfig::output_root() const {
    const char* env = std::getenv("BSLDM_OUTPUT_ROOT");
    if (env && *env) return env;
    return run.output_root;
}

std::string ExperimentConfig::config_fingerprint() const {
    std::string blob;
    for (const auto& [k, v] : to_ini().entries()) {
        if (k == "run.output_root" || k == "run.tag") continue;  // output location only
        blob += k + "=" + v + "\n";
    }
    return fingerprint_hex(blob);
}

std::string ExperimentConfig::data_fingerprint() const {
    std::string s = "data|" + data.raw_dir + "|" + std::to_string(data.synthetic_n) + "|" +
                    fmt(data.bone_amplitude) + "|" + std::to_string(data.image_size) + "|" +
                    (data.clahe ? "1" : "0") + "|" + fmt(data.clahe_clip) + "|" +
                    std::to_string(data.clahe_grid) + "|" + data.normalize + "|" +
                    (data.jsrt_negative ? "1" : "0") + "|" + fmt(data.jsrt_gamma) + "|" +
                    fmt(data.ratio_train) + "|" + fmt(data.ratio_val) + "|" + fmt(data.ratio_test) +
                    "|" + data.blacklist + "|" + std::to_string(run.seed);
    return fingerprint_hex(s);
}

std::string ExperimentConfig::compressor_fingerprint() const {
    std::string s = "compressor|" + std::to_string(compressor.r) + "|" +
                    std::to_string(compressor.latent_channels) + "|" +
                    std::to_string(compressor.codebook_size) + "|" +
                    std::to_string(compressor.base_channels) + "|" +
                    std::to_string(compressor.num_res_blocks) + "|" +
                    std::to_string(compressor.norm_groups) + "|" +
                    std::to_string(compressor.disc_base_channels);
    return fingerprint_hex(s);
}

std::string ExperimentConfig::estimator_fingerprint() const {
    std::string s = "estimator|" + std::to_string(estimator.base_channels) + "|" +
                    join_int_list(estimator.channel_mults) + "|" +
                    join_int_list(estimator.attention_resolutions) + "|" +
                    std::to_string(estimator.num_res_blocks) + "|" +
                    std::to_string(estimator.norm_groups) + "|" +
                    std::to_string(estimator.temb_dim) + "|" +
                    std::to_string(compressor.latent_channels) + "|" +
                    std::to_string(data.image_size / compressor.r);
    return fingerprint_hex(s);
}

std::string ExperimentConfig::schedule_fingerprint() const {
    std::string s = "schedule|" + std::to_string(schedule.T) + "|" + fmt(schedule.beta_min) + "|" +
                    fmt(schedule.beta_max) + "|" + fmt(schedule.offset_lambda);
    return fingerprint_hex(s);
}

}  // namespace bsldm::pipeline
