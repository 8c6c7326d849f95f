#include "pipeline/runner.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "core/csv.hpp"
#include "core/error.hpp"
#include "core/fingerprint.hpp"
#include "core/image.hpp"
#include "core/rng.hpp"
#include "data/dataset.hpp"
#include "data/synthetic.hpp"
#include "ldm/ldm.hpp"
#include "pipeline/checkpoint.hpp"
#include "sampler/sampler.hpp"
#include "vq/vqgan.hpp"

namespace fs = std::filesystem;

namespace bsldm::pipeline {

namespace {

// Seed stream salts; each pipeline stage draws from its own stream so stages
// can be rerun or reordered without disturbing each other.
constexpr std::uint64_t kSaltSynthetic = 0xDA7A;
constexpr std::uint64_t kSaltSplit = 0x5717;
constexpr std::uint64_t kSaltVqInit = 0xA100;
constexpr std::uint64_t kSaltVqTrain = 0xA101;
constexpr std::uint64_t kSaltLdmInit = 0xB200;
constexpr std::uint64_t kSaltLdmTrain = 0xB201;
constexpr std::uint64_t kSaltSample = 0x5A3B;
constexpr std::uint64_t kSaltPsdNoise = 0x9D;

std::string join(const std::string& a, const std::string& b) {
    return (fs::path(a) / b).string();
}

void ensure_dir(const std::string& dir) {
    if (!dir.empty()) fs::create_directories(dir);
}

std::string fmtv(real v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);  // shortest exact form
    return std::string(buf, res.ptr);
}

std::string fmtv(real v, int prec) {
    std::ostringstream os;
    os << std::setprecision(prec) << v;
    return os.str();
}

data::NormalizeMode normalize_mode(const std::string& name) {
    if (name == "minmax") return data::NormalizeMode::MinMax;
    if (name == "fixed") return data::NormalizeMode::Fixed;
    fail(Status::InvalidArgument, "unknown normalize mode: " + name);
}

data::PreprocessConfig preprocess_config(const ExperimentConfig& cfg) {
    data::PreprocessConfig pc;
    pc.target_size = cfg.data.image_size;
    pc.clahe_enabled = cfg.data.clahe;
    pc.clahe_clip = cfg.data.clahe_clip;
    pc.clahe_grid = cfg.data.clahe_grid;
    pc.normalize = normalize_mode(cfg.data.normalize);
    return pc;
}

vq::CompressorConfig compressor_config(const ExperimentConfig& cfg) {
    vq::CompressorConfig cc;
    cc.r = cfg.compressor.r;
    cc.latent_channels = cfg.compressor.latent_channels;
    cc.codebook_size = cfg.compressor.codebook_size;
    cc.base_channels = cfg.compressor.base_channels;
    cc.num_res_blocks = cfg.compressor.num_res_blocks;
    cc.norm_groups = cfg.compressor.norm_groups;
    cc.disc_base_channels = cfg.compressor.disc_base_channels;
    cc.lambda_l1 = cfg.compressor.lambda_l1;
    cc.lambda_per = cfg.compressor.lambda_per;
    cc.lambda_adv = cfg.compressor.lambda_adv;
    cc.lambda_qua = cfg.compressor.lambda_qua;
    cc.beta_commit = cfg.compressor.beta_commit;
    return cc;
}

ldm::UNetConfig unet_config(const ExperimentConfig& cfg) {
    ldm::UNetConfig uc;
    uc.in_channels = 2 * cfg.compressor.latent_channels;
    uc.out_channels = cfg.compressor.latent_channels;
    uc.base_channels = cfg.estimator.base_channels;
    uc.channel_mults = cfg.estimator.channel_mults;
    uc.attention_resolutions = cfg.estimator.attention_resolutions;
    uc.num_res_blocks = cfg.estimator.num_res_blocks;
    uc.norm_groups = cfg.estimator.norm_groups;
    uc.temb_dim = cfg.estimator.temb_dim;
    require(cfg.data.image_size % cfg.compressor.r == 0, Status::InvalidArgument,
            "image size not divisible by compressor stride");
    uc.latent_size = cfg.data.image_size / cfg.compressor.r;
    return uc;
}

NoiseSchedule make_schedule(const ExperimentConfig& cfg) {
    return make_cosine_schedule(cfg.schedule.T, cfg.schedule.beta_min, cfg.schedule.beta_max);
}

sampler::ThresholdPolicy policy_of(const ExperimentConfig& cfg, const std::string& kind) {
    sampler::ThresholdPolicy p;
    p.kind = sampler::threshold_kind_from_name(kind);
    p.omega = cfg.sampler.omega;
    p.intercept = cfg.sampler.intercept;
    p.percentile = cfg.sampler.percentile;
    sampler::validate_policy(p);
    return p;
}

// Manifest paths are stored relative to the data directory.
std::vector<data::ManifestRow> manifest_rows(const RunPaths& p, const ExperimentConfig& cfg) {
    require(fs::exists(p.manifest), Status::Precondition,
            "no prepared data at " + p.manifest + "; run prepare first");
    IniFile meta = IniFile::load(p.prepare_meta);
    std::string got = meta.get("prepare.fingerprint").value_or("");
    std::string want = cfg.data_fingerprint();
    require(got == want, Status::Precondition,
            "prepared data fingerprint " + got + " does not match config " + want +
                "; re-run prepare");
    return data::read_manifest(p.manifest);
}

std::vector<data::ManifestRow> rows_of_split(const std::vector<data::ManifestRow>& rows,
                                             data::Split s) {
    std::vector<data::ManifestRow> out;
    for (const auto& r : rows)
        if (r.split == s) out.push_back(r);
    return out;
}

Tensor load_model_tensor(const RunPaths& p, const std::string& rel_path) {
    Image img = load_png_gray(join(p.data_dir, rel_path));
    return image_to_tensor(to_model(img));
}

Image load_unit_image(const RunPaths& p, const std::string& rel_path) {
    return load_png_gray(join(p.data_dir, rel_path));
}

void check_meta(const Checkpoint& ck, const std::string& key, const std::string& want,
                const std::string& what) {
    std::string got = ck.meta.value(key, std::string());
    require(got == want, Status::Precondition,
            what + " fingerprint mismatch: checkpoint has " + got + ", config expects " + want);
}

// VqGan caches raw pointers into its own members, so it lives on the heap and
// never moves.
struct LoadedVqGan {
    std::unique_ptr<vq::VqGan> model;
    int epoch = 0;
};

// Loads the compressor checkpoint and verifies it belongs to this config.
LoadedVqGan load_compressor(const ExperimentConfig& cfg, const RunPaths& p,
                            bool require_finished) {
    require(fs::exists(p.vqgan_ck), Status::Precondition,
            "no compressor checkpoint at " + p.vqgan_ck + "; run `train vqgan` first");
    Checkpoint ck = Checkpoint::load(p.vqgan_ck);
    check_meta(ck, "compressor_fp", cfg.compressor_fingerprint(), "compressor");
    check_meta(ck, "data_fp", cfg.data_fingerprint(), "data");
    LoadedVqGan out;
    out.model = std::make_unique<vq::VqGan>(compressor_config(cfg));
    ck_get_params(ck, "gen", out.model->gen_params());
    ck_get_params(ck, "disc", out.model->disc_params());
    out.epoch = ck.meta.value("epoch", 0);
    if (require_finished)
        require(out.epoch >= cfg.compressor.epochs, Status::Precondition,
                "compressor training incomplete: epoch " + std::to_string(out.epoch) + " of " +
                    std::to_string(cfg.compressor.epochs));
    return out;
}

std::string offset_ck_path(const RunPaths& p, bool offset_on) {
    return offset_on ? p.ldm_ck : p.ldm_offset0_ck;
}

void save_vq_checkpoint(const std::string& path, const ExperimentConfig& cfg, vq::VqGan& model,
                        const nn::Adam& gen_opt, const nn::Adam& disc_opt, int epochs_done) {
    Checkpoint ck;
    ck.meta["kind"] = "vqgan";
    ck.meta["epoch"] = epochs_done;
    ck.meta["config_fp"] = cfg.config_fingerprint();
    ck.meta["compressor_fp"] = cfg.compressor_fingerprint();
    ck.meta["data_fp"] = cfg.data_fingerprint();
    ck.meta["perceptual"] = cfg.compressor.perceptual;
    ck_put_params(ck, "gen", model.gen_params());
    ck_put_params(ck, "disc", model.disc_params());
    ck_put_adam(ck, "adam_gen", gen_opt, model.gen_params());
    ck_put_adam(ck, "adam_disc", disc_opt, model.disc_params());
    ck.save(path);
}

void save_ldm_checkpoint(const std::string& path, const ExperimentConfig& cfg, ldm::UNet& net,
                         const nn::Adam& opt, const nn::Ema& ema, real offset_lambda,
                         int epochs_done) {
    Checkpoint ck;
    ck.meta["kind"] = "ldm";
    ck.meta["epoch"] = epochs_done;
    ck.meta["config_fp"] = cfg.config_fingerprint();
    ck.meta["estimator_fp"] = cfg.estimator_fingerprint();
    ck.meta["compressor_fp"] = cfg.compressor_fingerprint();
    ck.meta["schedule_fp"] = cfg.schedule_fingerprint();
    ck.meta["data_fp"] = cfg.data_fingerprint();
    ck.meta["offset_lambda"] = offset_lambda;
    ck.meta["ema_decay"] = cfg.estimator.ema_decay;
    ck_put_params(ck, "net", net.params());
    ck_put_adam(ck, "adam", opt, net.params());
    ck_put_ema(ck, "ema", ema, net.params());
    ck.save(path);
}

void train_vqgan_stage(const ExperimentConfig& cfg) {
    RunPaths p = RunPaths::from(cfg);
    auto rows = rows_of_split(manifest_rows(p, cfg), data::Split::Train);
    require(!rows.empty(), Status::Precondition, "train split is empty");

    // the compressor sees both domains
    std::vector<Tensor> images;
    images.reserve(rows.size() * 2);
    for (const auto& r : rows) {
        images.push_back(load_model_tensor(p, r.cxr_path));
        images.push_back(load_model_tensor(p, r.tissue_path));
    }

    vq::VqGan model(compressor_config(cfg));
    nn::Adam gen_opt({.lr = cfg.compressor.lr}, model.gen_params());
    nn::Adam disc_opt({.lr = cfg.compressor.disc_lr}, model.disc_params());

    int start_epoch = 0;
    if (fs::exists(p.vqgan_ck)) {
        Checkpoint ck = Checkpoint::load(p.vqgan_ck);
        check_meta(ck, "compressor_fp", cfg.compressor_fingerprint(), "compressor");
        check_meta(ck, "data_fp", cfg.data_fingerprint(), "data");
        ck_get_params(ck, "gen", model.gen_params());
        ck_get_params(ck, "disc", model.disc_params());
        ck_get_adam(ck, "adam_gen", gen_opt, model.gen_params());
        ck_get_adam(ck, "adam_disc", disc_opt, model.disc_params());
        start_epoch = ck.meta.value("epoch", 0);
    } else {
        Rng rng(mix_seed(cfg.run.seed, kSaltVqInit));
        model.init_weights(rng);
    }
    if (start_epoch >= cfg.compressor.epochs) {
        std::cout << "[train vqgan] checkpoint already at epoch " << start_epoch << ", nothing to do\n";
        return;
    }

    auto fe = metrics::make_extractor(cfg.compressor.perceptual);

    ensure_dir(p.log_dir);
    std::string log_path = join(p.log_dir, "vqgan_loss.csv");
    bool fresh_log = !fs::exists(log_path);
    CsvWriter log(log_path, /*append=*/true);
    if (fresh_log)
        log.row({"epoch", "l1", "perceptual", "adversarial", "quantization", "total",
                 "disc_loss", "codebook_usage"});

    ensure_dir(p.ck_dir);
    vq::VqTrainConfig tc;
    tc.epochs = cfg.compressor.epochs;
    tc.start_epoch = start_epoch;
    tc.batch_size = cfg.compressor.batch_size;
    tc.lr_step_epochs = cfg.compressor.lr_step_epochs;
    tc.lr_gamma = cfg.compressor.lr_gamma;
    tc.disc_warmup_steps = cfg.compressor.disc_warmup_steps;
    tc.seed = mix_seed(cfg.run.seed, kSaltVqTrain);

    std::cout << "[train vqgan] " << images.size() << " images, epochs " << start_epoch << ".."
              << cfg.compressor.epochs << "\n";
    vq::train_vqgan(model, gen_opt, disc_opt, images, *fe, tc,
                    [&](int epoch, const vq::VqEpochStats& st) {
                        log.row({std::to_string(epoch), fmtv(st.l1), fmtv(st.perceptual),
                                 fmtv(st.adversarial), fmtv(st.quantization), fmtv(st.total),
                                 fmtv(st.disc_loss), fmtv(st.codebook_usage)});
                        save_vq_checkpoint(p.vqgan_ck, cfg, model, gen_opt, disc_opt, epoch + 1);
                        if (epoch % 10 == 0 || epoch + 1 == cfg.compressor.epochs)
                            std::cout << "[train vqgan] epoch " << epoch << " total "
                                      << fmtv(st.total, 5) << " l1 " << fmtv(st.l1, 5)
                                      << " usage " << fmtv(st.codebook_usage, 3) << "\n";
                    });
}

// Encodes the train split through the frozen compressor once; latents are the
// diffusion training set.
void encode_split(vq::VqGan& comp, const RunPaths& p, const std::vector<data::ManifestRow>& rows,
                  std::vector<Tensor>& z0s, std::vector<Tensor>& conds) {
    const int chunk = 8;
    for (std::size_t start = 0; start < rows.size(); start += chunk) {
        std::size_t end = std::min(rows.size(), start + chunk);
        std::vector<Tensor> tissue, cxr;
        for (std::size_t i = start; i < end; ++i) {
            tissue.push_back(load_model_tensor(p, rows[i].tissue_path));
            cxr.push_back(load_model_tensor(p, rows[i].cxr_path));
        }
        std::vector<const Tensor*> tp, cp;
        for (const auto& t : tissue) tp.push_back(&t);
        for (const auto& t : cxr) cp.push_back(&t);
        Tensor zt = comp.encode(stack_batch(tp));
        Tensor zc = comp.encode(stack_batch(cp));
        for (int i = 0; i < int(end - start); ++i) {
            z0s.push_back(slice_batch(zt, i));
            conds.push_back(slice_batch(zc, i));
        }
    }
}

void train_ldm_stage(const ExperimentConfig& cfg, bool offset_on) {
    RunPaths p = RunPaths::from(cfg);
    auto rows = rows_of_split(manifest_rows(p, cfg), data::Split::Train);
    require(!rows.empty(), Status::Precondition, "train split is empty");

    LoadedVqGan comp = load_compressor(cfg, p, /*require_finished=*/true);

    std::vector<Tensor> z0s, conds;
    encode_split(*comp.model, p, rows, z0s, conds);

    ldm::UNet net(unet_config(cfg));
    nn::AdamConfig ac;
    ac.lr = cfg.estimator.lr;
    ac.weight_decay = cfg.estimator.weight_decay;
    nn::Adam opt(ac, net.params());
    nn::Ema ema(cfg.estimator.ema_decay, net.params());

    const real offset_lambda = offset_on ? cfg.schedule.offset_lambda : 0.0;
    const std::string ck_path = offset_ck_path(p, offset_on);
    const std::string tag = offset_on ? "ldm" : "ldm-offset0";

    int start_epoch = 0;
    if (fs::exists(ck_path)) {
        Checkpoint ck = Checkpoint::load(ck_path);
        check_meta(ck, "estimator_fp", cfg.estimator_fingerprint(), "estimator");
        check_meta(ck, "compressor_fp", cfg.compressor_fingerprint(), "compressor");
        check_meta(ck, "schedule_fp", cfg.schedule_fingerprint(), "schedule");
        real ck_lambda = ck.meta.value("offset_lambda", -1.0);
        require(ck_lambda == offset_lambda, Status::Precondition,
                "checkpoint offset lambda " + fmtv(ck_lambda) + " does not match requested " +
                    fmtv(offset_lambda));
        ck_get_params(ck, "net", net.params());
        ck_get_adam(ck, "adam", opt, net.params());
        ck_get_ema(ck, "ema", ema, net.params());
        start_epoch = ck.meta.value("epoch", 0);
    } else {
        Rng rng(mix_seed(cfg.run.seed, kSaltLdmInit));
        net.init_weights(rng);
        for (std::size_t i = 0; i < ema.shadow.size(); ++i)
            ema.shadow[i] = net.params()[i]->value;  // start the average at the init point
    }
    if (start_epoch >= cfg.estimator.epochs) {
        std::cout << "[train " << tag << "] checkpoint already at epoch " << start_epoch
                  << ", nothing to do\n";
        return;
    }

    NoiseSchedule sched = make_schedule(cfg);
    OffsetNoiseConfig offset{offset_lambda};

    ensure_dir(p.log_dir);
    std::string log_path = join(p.log_dir, (offset_on ? "ldm_loss.csv" : "ldm_offset0_loss.csv"));
    bool fresh_log = !fs::exists(log_path);
    CsvWriter log(log_path, /*append=*/true);
    if (fresh_log) log.row({"epoch", "loss", "lr"});

    ensure_dir(p.ck_dir);
    ldm::LdmTrainConfig tc;
    tc.epochs = cfg.estimator.epochs;
    tc.start_epoch = start_epoch;
    tc.batch_size = cfg.estimator.batch_size;
    tc.ema_decay = cfg.estimator.ema_decay;
    tc.lr_step_epochs = cfg.estimator.lr_step_epochs;
    tc.lr_gamma = cfg.estimator.lr_gamma;
    tc.seed = mix_seed(cfg.run.seed, kSaltLdmTrain);  // shared across offset on/off

    std::cout << "[train " << tag << "] " << z0s.size() << " latent pairs, epochs " << start_epoch
              << ".." << cfg.estimator.epochs << ", offset lambda " << offset_lambda << "\n";
    ldm::train_ldm(net, opt, ema, z0s, conds, sched, offset, tc,
                   [&](int epoch, real loss, real lr) {
                       log.row({std::to_string(epoch), fmtv(loss), fmtv(lr)});
                       save_ldm_checkpoint(ck_path, cfg, net, opt, ema, offset_lambda, epoch + 1);
                       if (epoch % 10 == 0 || epoch + 1 == cfg.estimator.epochs)
                           std::cout << "[train " << tag << "] epoch " << epoch << " loss "
                                     << fmtv(loss, 5) << "\n";
                   });
}

// Shared by cmd_sample and the ablation grid. Samples the test split with the
// EMA weights from `ldm_path` into `out_dir`.
void sample_into(const ExperimentConfig& cfg, const std::string& ldm_path,
                 const sampler::ThresholdPolicy& policy, const std::string& out_dir,
                 bool want_trace) {
    RunPaths p = RunPaths::from(cfg);
    auto rows = rows_of_split(manifest_rows(p, cfg), data::Split::Test);
    require(!rows.empty(), Status::Precondition, "test split is empty");

    LoadedVqGan comp = load_compressor(cfg, p, /*require_finished=*/false);

    require(fs::exists(ldm_path), Status::Precondition,
            "no estimator checkpoint at " + ldm_path + "; run `train ldm` first");
    Checkpoint ck = Checkpoint::load(ldm_path);
    check_meta(ck, "estimator_fp", cfg.estimator_fingerprint(), "estimator");
    check_meta(ck, "schedule_fp", cfg.schedule_fingerprint(), "schedule");
    check_meta(ck, "compressor_fp", cfg.compressor_fingerprint(), "compressor");

    ldm::UNet net(unet_config(cfg));
    // sample with the averaged weights
    nn::Ema ema(cfg.estimator.ema_decay, net.params());
    ck_get_params(ck, "net", net.params());
    ck_get_ema(ck, "ema", ema, net.params());
    ema.copy_to(net.params());

    NoiseSchedule sched = make_schedule(cfg);
    ensure_dir(out_dir);

    const std::uint64_t sample_seed = mix_seed(cfg.run.seed, kSaltSample);
    const int chunk = std::max(1, cfg.sampler.batch_size);
    int written = 0;
    for (std::size_t start = 0; start < rows.size(); start += chunk) {
        std::size_t end = std::min(rows.size(), start + std::size_t(chunk));
        std::vector<Tensor> cxr;
        std::vector<const Tensor*> cp;
        std::vector<std::uint64_t> seeds;
        for (std::size_t i = start; i < end; ++i) {
            cxr.push_back(load_model_tensor(p, rows[i].cxr_path));
            seeds.push_back(mix_seed(sample_seed, fnv1a64(rows[i].id)));
        }
        for (const auto& t : cxr) cp.push_back(&t);

        bool trace_this = want_trace && start == 0;
        sampler::SampleResult res = sampler::sample_soft_tissue(
            *comp.model, net, stack_batch(cp), sched, policy, seeds, trace_this);

        for (std::size_t i = start; i < end; ++i) {
            Image img = to_unit(tensor_to_image(slice_batch(res.images, int(i - start))));
            save_png_gray16(img, join(out_dir, rows[i].id + ".png"));
            ++written;
        }
        if (trace_this) {
            CsvWriter tr(join(out_dir, "trace.csv"));
            tr.row({"t", "s", "z_min", "z_max", "z_mean", "z_std"});
            for (const auto& r : res.trace)
                tr.row({std::to_string(r.t), fmtv(r.s), fmtv(r.z_min), fmtv(r.z_max),
                        fmtv(r.z_mean), fmtv(r.z_std)});
        }
    }

    IniFile meta;
    meta.set("sample.config_fingerprint", cfg.config_fingerprint());
    meta.set("sample.data_fingerprint", cfg.data_fingerprint());
    meta.set("sample.schedule_fingerprint", cfg.schedule_fingerprint());
    meta.set("sample.threshold", sampler::threshold_kind_name(policy.kind));
    meta.set("sample.estimator_epoch", std::to_string(ck.meta.value("epoch", 0)));
    meta.set("sample.count", std::to_string(written));
    meta.set("sample.weights", "ema");
    meta.save(join(out_dir, "sample.meta"));
    std::cout << "[sample] wrote " << written << " images to " << out_dir << "\n";
}

nlohmann::json stat_json(const metrics::SummaryStat& s, int decimals) {
    nlohmann::json j;
    j["mean"] = s.mean;
    j["sd"] = s.sd;
    j["formatted"] = metrics::format_mean_std(s, decimals);
    return j;
}

}  // namespace

RunPaths RunPaths::from(const ExperimentConfig& cfg) {
    RunPaths p;
    p.root = cfg.output_root();
    p.data_dir = join(p.root, "data");
    p.manifest = join(p.data_dir, "manifest.csv");
    p.prepare_meta = join(p.data_dir, "prepare.ini");
    p.ck_dir = join(p.root, "checkpoints");
    p.vqgan_ck = join(p.ck_dir, "vqgan.ck");
    p.ldm_ck = join(p.ck_dir, "ldm.ck");
    p.ldm_offset0_ck = join(p.ck_dir, "ldm_offset0.ck");
    p.log_dir = join(p.root, "logs");
    // data/checkpoints/logs are shared across sweep values; sampling outputs
    // and reports are scoped by the tag so values do not clobber each other
    std::string suffix = cfg.run.tag.empty() ? "" : "-" + cfg.run.tag;
    p.sample_dir = join(p.root, "samples" + suffix);
    p.ablate_sample_dir = join(p.root, "samples_ablate" + suffix);
    p.report_dir = join(p.root, "reports" + suffix);
    return p;
}

void cmd_prepare(const ExperimentConfig& cfg, bool force) {
    RunPaths p = RunPaths::from(cfg);
    const std::string fp = cfg.data_fingerprint();

    if (fs::exists(p.prepare_meta)) {
        IniFile meta = IniFile::load(p.prepare_meta);
        std::string got = meta.get("prepare.fingerprint").value_or("");
        if (got == fp && !force) {
            std::cout << "[prepare] up to date (fingerprint " << fp << ")\n";
            return;
        }
        require(force, Status::Precondition,
                "prepared data at " + p.data_dir + " has fingerprint " + got +
                    " but config expects " + fp + "; pass --force to rebuild");
    }
    fs::remove_all(p.data_dir);
    ensure_dir(join(p.data_dir, "cxr"));
    ensure_dir(join(p.data_dir, "tissue"));

    const std::array<real, 3> ratios{cfg.data.ratio_train, cfg.data.ratio_val,
                                     cfg.data.ratio_test};
    data::PreprocessConfig pc = preprocess_config(cfg);
    std::vector<data::ManifestRow> rows;

    if (cfg.data.synthetic_n > 0) {
        ensure_dir(join(p.data_dir, "bone"));
        data::SyntheticConfig sc;
        sc.size = cfg.data.image_size;
        sc.bone_amplitude = cfg.data.bone_amplitude;
        auto pairs = data::generate_synthetic_pairs(cfg.data.synthetic_n, sc,
                                                    mix_seed(cfg.run.seed, kSaltSynthetic));
        auto splits = data::split_dataset(int(pairs.size()), ratios,
                                          mix_seed(cfg.run.seed, kSaltSplit));
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            const auto& pr = pairs[i];
            save_png_gray16(to_unit(preprocess(pr.cxr, pc)),
                            join(p.data_dir, "cxr/" + pr.id + ".png"));
            save_png_gray16(to_unit(preprocess(pr.soft, pc)),
                            join(p.data_dir, "tissue/" + pr.id + ".png"));
            save_png_gray16(pr.bone, join(p.data_dir, "bone/" + pr.id + ".png"));
            rows.push_back({pr.id, splits[i], "cxr/" + pr.id + ".png",
                            "tissue/" + pr.id + ".png", "bone/" + pr.id + ".png"});
        }
    } else {
        require(!cfg.data.raw_dir.empty(), Status::InvalidArgument,
                "either data.synthetic_n > 0 or data.raw_dir must be set");
        std::string raw_cxr = join(cfg.data.raw_dir, "cxr");
        std::string raw_tissue = join(cfg.data.raw_dir, "tissue");
        require(fs::is_directory(raw_cxr) && fs::is_directory(raw_tissue), Status::Io,
                "raw_dir must contain cxr/ and tissue/ subdirectories");

        std::set<std::string> excluded;
        if (!cfg.data.blacklist.empty()) {
            std::ifstream bl(cfg.data.blacklist);
            require(bl.good(), Status::Io, "cannot open blacklist " + cfg.data.blacklist);
            std::string line;
            while (std::getline(bl, line)) {
                line = trim(line);
                if (!line.empty()) excluded.insert(line);
            }
        }

        std::vector<std::string> ids;
        for (const auto& e : fs::directory_iterator(raw_cxr))
            if (e.path().extension() == ".png" && !excluded.count(e.path().stem().string()))
                ids.push_back(e.path().stem().string());
        std::sort(ids.begin(), ids.end());
        require(!ids.empty(), Status::Io, "no .png files in " + raw_cxr);

        auto splits = data::split_dataset(int(ids.size()), ratios,
                                          mix_seed(cfg.run.seed, kSaltSplit));
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const std::string& id = ids[i];
            std::string tissue_path = join(raw_tissue, id + ".png");
            require(fs::exists(tissue_path), Status::Io,
                    "missing soft-tissue image for " + id);
            Image cxr = load_png_gray(join(raw_cxr, id + ".png"));
            Image tissue = load_png_gray(tissue_path);
            if (cfg.data.jsrt_negative) {
                cxr = data::jsrt_to_negative(cxr, cfg.data.jsrt_gamma);
                tissue = data::jsrt_to_negative(tissue, cfg.data.jsrt_gamma);
            }
            save_png_gray16(to_unit(preprocess(cxr, pc)), join(p.data_dir, "cxr/" + id + ".png"));
            save_png_gray16(to_unit(preprocess(tissue, pc)),
                            join(p.data_dir, "tissue/" + id + ".png"));
            rows.push_back({id, splits[i], "cxr/" + id + ".png", "tissue/" + id + ".png", ""});
        }
    }

    data::write_manifest(p.manifest, rows);
    int n_train = int(rows_of_split(rows, data::Split::Train).size());
    int n_val = int(rows_of_split(rows, data::Split::Val).size());
    int n_test = int(rows_of_split(rows, data::Split::Test).size());

    IniFile meta;
    meta.set("prepare.fingerprint", fp);
    meta.set("prepare.config_fingerprint", cfg.config_fingerprint());
    meta.set("prepare.count", std::to_string(rows.size()));
    meta.set("prepare.train", std::to_string(n_train));
    meta.set("prepare.val", std::to_string(n_val));
    meta.set("prepare.test", std::to_string(n_test));
    meta.set("prepare.image_size", std::to_string(cfg.data.image_size));
    meta.set("prepare.normalize", cfg.data.normalize);
    meta.save(p.prepare_meta);

    std::cout << "[prepare] wrote " << rows.size() << " pairs (" << n_train << " train / "
              << n_val << " val / " << n_test << " test) to " << p.data_dir << "\n";
}

void cmd_train(const ExperimentConfig& cfg, const std::string& stage) {
    if (stage == "vqgan") {
        train_vqgan_stage(cfg);
    } else if (stage == "ldm") {
        train_ldm_stage(cfg, /*offset_on=*/true);
    } else {
        fail(Status::InvalidArgument, "unknown training stage: " + stage +
                                          " (expected vqgan or ldm)");
    }
}

void cmd_sample(const ExperimentConfig& cfg, bool trace) {
    RunPaths p = RunPaths::from(cfg);
    sample_into(cfg, p.ldm_ck, policy_of(cfg, cfg.sampler.threshold), p.sample_dir, trace);
}

EvalSummary evaluate_dir(const ExperimentConfig& cfg, const std::string& sample_dir,
                         const std::string& report_stem) {
    RunPaths p = RunPaths::from(cfg);
    auto rows = rows_of_split(manifest_rows(p, cfg), data::Split::Test);
    require(!rows.empty(), Status::Precondition, "test split is empty");

    std::set<std::string> predicted;
    require(fs::is_directory(sample_dir), Status::Precondition,
            "no sample directory at " + sample_dir);
    for (const auto& e : fs::directory_iterator(sample_dir))
        if (e.path().extension() == ".png") predicted.insert(e.path().stem().string());

    std::vector<std::string> missing, unexpected;
    std::set<std::string> expected;
    for (const auto& r : rows) {
        expected.insert(r.id);
        if (!predicted.count(r.id)) missing.push_back(r.id);
    }
    for (const auto& id : predicted)
        if (!expected.count(id)) unexpected.push_back(id);
    if (!missing.empty() || !unexpected.empty()) {
        std::string msg = "prediction set does not match the test split:";
        if (!missing.empty()) {
            msg += " missing predictions for [";
            for (std::size_t i = 0; i < missing.size(); ++i)
                msg += (i ? ", " : "") + missing[i];
            msg += "]";
        }
        if (!unexpected.empty()) {
            msg += " unexpected files [";
            for (std::size_t i = 0; i < unexpected.size(); ++i)
                msg += (i ? ", " : "") + unexpected[i];
            msg += "]";
        }
        fail(Status::Precondition, msg);
    }

    auto extractor = metrics::make_extractor(cfg.metrics.extractor);

    ensure_dir(fs::path(report_stem).parent_path().string());
    CsvWriter csv(report_stem + ".csv");
    csv.row({"id", "bsr", "mse", "psnr", "lpips", "mean_diff"});

    std::vector<real> v_bsr, v_mse, v_psnr, v_lpips, v_diff;
    for (const auto& r : rows) {
        Image s_img = load_unit_image(p, r.tissue_path);
        Image pred_img = load_png_gray(join(sample_dir, r.id + ".png"));
        Tensor s = image_to_tensor(s_img);
        Tensor s_hat = image_to_tensor(pred_img);

        Tensor bone;
        if (!r.bone_path.empty()) {
            bone = image_to_tensor(load_unit_image(p, r.bone_path));
        } else {
            Image cxr_img = load_unit_image(p, r.cxr_path);
            require(cxr_img.size() == s_img.size(), Status::Precondition,
                    "cxr/tissue size mismatch for " + r.id);
            Image b(cxr_img.h, cxr_img.w);
            for (std::size_t i = 0; i < b.px.size(); ++i)
                b.px[i] = std::max(0.0, cxr_img.px[i] - s_img.px[i]);
            bone = image_to_tensor(b);
        }

        real bsr_v = metrics::bsr(s, s_hat, bone);
        metrics::MsePsnr mp = metrics::mse_psnr(s, s_hat, 1.0);
        real lp = metrics::lpips(s, s_hat, *extractor);
        real diff = std::abs(pred_img.mean() - s_img.mean());

        v_bsr.push_back(bsr_v);
        v_mse.push_back(mp.mse);
        v_psnr.push_back(mp.psnr);
        v_lpips.push_back(lp);
        v_diff.push_back(diff);
        csv.row({r.id, fmtv(bsr_v), fmtv(mp.mse), fmtv(mp.psnr), fmtv(lp), fmtv(diff)});
    }

    EvalSummary sum;
    sum.count = int(rows.size());
    sum.extractor = extractor->label();
    sum.bsr = metrics::summarize(v_bsr);
    sum.mse = metrics::summarize(v_mse);
    sum.psnr = metrics::summarize(v_psnr);
    sum.lpips = metrics::summarize(v_lpips);
    sum.mean_diff = metrics::summarize(v_diff);

    nlohmann::json j;
    j["config_fingerprint"] = cfg.config_fingerprint();
    j["data_fingerprint"] = cfg.data_fingerprint();
    j["count"] = sum.count;
    j["extractor"] = sum.extractor;
    j["bsr"] = stat_json(sum.bsr, 3);
    j["mse"] = stat_json(sum.mse, 4);
    j["psnr"] = stat_json(sum.psnr, 3);
    j["lpips"] = stat_json(sum.lpips, 4);
    j["mean_diff"] = stat_json(sum.mean_diff, 4);
    std::ofstream js(report_stem + ".json", std::ios::trunc);
    require(js.good(), Status::Io, "cannot write " + report_stem + ".json");
    js << j.dump(2) << "\n";

    std::cout << "[evaluate] " << sum.count << " images: BSR "
              << metrics::format_mean_std(sum.bsr, 3) << ", MSE "
              << metrics::format_mean_std(sum.mse, 4) << ", PSNR "
              << metrics::format_mean_std(sum.psnr, 3) << ", LPIPS "
              << metrics::format_mean_std(sum.lpips, 4) << "\n";
    return sum;
}

EvalSummary cmd_evaluate(const ExperimentConfig& cfg) {
    RunPaths p = RunPaths::from(cfg);
    ensure_dir(p.report_dir);
    return evaluate_dir(cfg, p.sample_dir, join(p.report_dir, "metrics"));
}

void cmd_ablate(const ExperimentConfig& cfg) {
    RunPaths p = RunPaths::from(cfg);

    // shared artifacts; each call is a no-op once its checkpoint is finished
    train_vqgan_stage(cfg);
    train_ldm_stage(cfg, /*offset_on=*/true);
    train_ldm_stage(cfg, /*offset_on=*/false);

    const std::vector<std::string> offsets{"off", "on"};
    const std::vector<std::string> thresholds{"none", "static", "dynamic", "temporal"};
    std::string cell_report_dir = join(p.report_dir, "ablate");
    ensure_dir(cell_report_dir);

    for (const auto& off : offsets) {
        for (const auto& thr : thresholds) {
            std::string cell = off + "-" + thr;
            std::string stem = join(cell_report_dir, cell);
            if (fs::exists(stem + ".json")) {
                std::cout << "[ablate] cell " << cell << " already scored, skipping\n";
                continue;
            }
            std::string dir = join(p.ablate_sample_dir, cell);
            sample_into(cfg, offset_ck_path(p, off == "on"), policy_of(cfg, thr), dir, false);
            evaluate_dir(cfg, dir, stem);
        }
    }

    // combined table, rebuilt from the per-cell summaries
    CsvWriter table(join(p.report_dir, "ablation.csv"));
    table.row({"offset", "threshold", "count", "bsr", "bsr_sd", "mse", "mse_sd", "psnr",
               "psnr_sd", "lpips", "lpips_sd", "mean_diff", "mean_diff_sd"});
    nlohmann::json combined;
    combined["config_fingerprint"] = cfg.config_fingerprint();
    combined["cells"] = nlohmann::json::array();
    for (const auto& off : offsets) {
        for (const auto& thr : thresholds) {
            std::string stem = join(cell_report_dir, off + "-" + thr);
            std::ifstream in(stem + ".json");
            require(in.good(), Status::Io, "missing cell summary " + stem + ".json");
            nlohmann::json j = nlohmann::json::parse(in);
            table.row({off, thr, std::to_string(j["count"].get<int>()),
                       fmtv(j["bsr"]["mean"].get<real>()), fmtv(j["bsr"]["sd"].get<real>()),
                       fmtv(j["mse"]["mean"].get<real>()), fmtv(j["mse"]["sd"].get<real>()),
                       fmtv(j["psnr"]["mean"].get<real>()), fmtv(j["psnr"]["sd"].get<real>()),
                       fmtv(j["lpips"]["mean"].get<real>()), fmtv(j["lpips"]["sd"].get<real>()),
                       fmtv(j["mean_diff"]["mean"].get<real>()),
                       fmtv(j["mean_diff"]["sd"].get<real>())});
            j["offset"] = off;
            j["threshold"] = thr;
            combined["cells"].push_back(j);
        }
    }
    std::ofstream js(join(p.report_dir, "ablation.json"), std::ios::trunc);
    js << combined.dump(2) << "\n";
    std::cout << "[ablate] wrote " << join(p.report_dir, "ablation.csv") << "\n";
}

void cmd_psd(const ExperimentConfig& cfg) {
    RunPaths p = RunPaths::from(cfg);
    auto rows = rows_of_split(manifest_rows(p, cfg), data::Split::Train);
    require(!rows.empty(), Status::Precondition, "train split is empty");
    const std::size_t cap = 1000;
    if (rows.size() > cap) rows.resize(cap);

    std::vector<Tensor> tissue;
    tissue.reserve(rows.size());
    for (const auto& r : rows) tissue.push_back(load_model_tensor(p, r.tissue_path));

    const int h = tissue.front().dim(2), w = tissue.front().dim(3);
    std::vector<Tensor> noise;
    noise.reserve(rows.size());
    Rng rng(mix_seed(cfg.run.seed, kSaltPsdNoise));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        Tensor t({1, 1, h, w});
        rng.normal_fill(t.data(), t.size());
        noise.push_back(std::move(t));
    }

    metrics::PsdProfile ps = metrics::psd_profile(tissue, cfg.metrics.psd_bins);
    metrics::PsdProfile pn = metrics::psd_profile(noise, cfg.metrics.psd_bins);

    ensure_dir(p.report_dir);
    CsvWriter csv(join(p.report_dir, "psd.csv"));
    csv.row({"bin", "center", "sites", "tissue_power", "noise_power"});
    for (std::size_t b = 0; b < ps.power.size(); ++b)
        csv.row({std::to_string(b), fmtv(ps.centers[b]), std::to_string(ps.sites[b]),
                 fmtv(ps.power[b]), fmtv(pn.power[b])});

    nlohmann::json j;
    j["config_fingerprint"] = cfg.config_fingerprint();
    j["samples"] = ps.samples;
    j["bins"] = int(ps.power.size());
    j["tissue_low_high_ratio"] = ps.power.front() / std::max(1e-300, ps.power.back());
    std::ofstream js(join(p.report_dir, "psd.json"), std::ios::trunc);
    js << j.dump(2) << "\n";
    std::cout << "[psd] " << ps.samples << " images, " << ps.power.size() << " bins, low/high "
              << fmtv(j["tissue_low_high_ratio"].get<real>(), 4) << "\n";
}

}  // namespace bsldm::pipeline
