// Command-line front end: dataset generation, curriculum training, windowed
// restoration, evaluation, and ablation report bundles.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <iostream>
#include <memory>
#include <set>

#include "latvsr/ilt.hpp"
#include "latvsr/io.hpp"
#include "latvsr/metrics.hpp"
#include "latvsr/trainer.hpp"

using namespace latvsr;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Exit codes: 0 ok, 2 configuration, 3 contract, 4 numeric.
constexpr int kExitConfig = 2;
constexpr int kExitContract = 3;
constexpr int kExitNumeric = 4;

std::string timestamp() {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return buf;
}

void write_run_manifest(const fs::path& out_dir, const std::string& command, const json& config,
                        uint64_t seed, const std::string& started) {
    json m{{"version", 1},
           {"command", command},
           {"config", config},
           {"config_hash", io::hash_hex(io::hash_string(config.dump()))},
           {"seed", seed},
           {"output_dir", out_dir.string()},
           {"started_at", started},
           {"finished_at", timestamp()}};
    io::write_json(out_dir / "run_manifest.json", m);
}

struct LoadedPipeline {
    std::unique_ptr<denoiser::DenoiserModel> model;
    std::unique_ptr<vae::VideoVae> vae;
    diffusion::NoiseSchedule sched;
    double latent_scale = 1.0;
    json meta;
};

LoadedPipeline load_pipeline(const fs::path& ckpt_path) {
    io::Checkpoint ck = io::load_checkpoint(ckpt_path);
    if (ck.kind != "train_state")
        throw std::runtime_error("expected a training checkpoint, got kind '" + ck.kind + "'");
    std::map<std::string, Tensor> model_t, vae_t;
    for (auto& [name, t] : ck.tensors) {
        if (name.rfind("model.", 0) == 0) model_t[name.substr(6)] = t;
        if (name.rfind("vae.", 0) == 0) vae_t[name.substr(4)] = t;
    }
    LoadedPipeline p;
    p.model = std::make_unique<denoiser::DenoiserModel>(
        denoiser::DenoiserModel::from_checkpoint(ck.meta.at("model"), model_t));
    p.vae = std::make_unique<vae::VideoVae>(vae::VideoVae::from_checkpoint(ck.meta.at("vae"), vae_t));
    p.sched = diffusion::build_schedule(
        diffusion::schedule_kind_from_string(ck.meta.at("schedule").at("kind").get<std::string>()),
        ck.meta.at("schedule").at("timesteps").get<int>());
    p.latent_scale = ck.meta.at("latent_scale").get<double>();
    p.meta = ck.meta;
    return p;
}

data::Dataset open_dataset_with_hint(const fs::path& dir) {
    if (!fs::exists(dir / "manifest.jsonl"))
        throw std::invalid_argument("missing dataset at " + dir.string() +
                                    "; generate it first with: latvsr gen-data --out " +
                                    dir.string() + " ...");
    return data::Dataset::open(dir);
}

trainer::DatasetSet load_dataset_root(const fs::path& root, const trainer::Curriculum& cur) {
    trainer::DatasetSet sets;
    std::set<std::string> seen;
    for (const auto& s : cur.stages) {
        std::string name = degradation::to_string(s.tier) + "_" + trainer::to_string(s.quality);
        if (!seen.insert(name).second) continue;
        sets.add(s.tier, s.quality, open_dataset_with_hint(root / name));
    }
    return sets;
}

data::Dataset load_eval_dataset(const fs::path& root) {
    if (fs::exists(root / "eval" / "manifest.jsonl")) return data::Dataset::open(root / "eval");
    std::cerr << "note: no eval dataset at " << (root / "eval")
              << ", evaluating on complex_base\n";
    return open_dataset_with_hint(root / "complex_base");
}

void save_vae_checkpoint(const fs::path& path, const vae::VideoVae& v, const json& extra) {
    io::Checkpoint ck;
    ck.kind = "vae";
    ck.meta = v.save_meta();
    ck.meta["extra"] = extra;
    ck.tensors = v.params().snapshot();
    io::save_checkpoint(path, ck);
}

vae::VideoVae load_vae_checkpoint(const fs::path& path) {
    io::Checkpoint ck = io::load_checkpoint(path);
    return vae::VideoVae::from_checkpoint(ck.meta, ck.tensors);
}

// Degraded long translating clip for inference-side ablations; motion is
// analytically known.
struct AblationClip {
    Tensor hr, lr, motion;
};

AblationClip make_ablation_clip(uint64_t seed, int64_t frames = 32) {
    synth::ClipSpec spec;
    spec.frames = frames;
    spec.height = 64;
    spec.width = 64;
    spec.motion = synth::Motion::Translate;
    spec.seed = seed;
    synth::SynthClip clip = synth::make_clip(spec);
    degradation::DegradationConfig dc;
    dc.tier = degradation::Tier::Complex;
    Rng rng(seed ^ 0xab1a7eull);
    auto pair = degradation::degrade(clip.hr, dc, rng);
    return {pair.hr, pair.lr, clip.motion_field};
}

json restore_and_measure(const LoadedPipeline& p, const AblationClip& clip,
                         const ilt::RestoreOptions& opt) {
    Tensor out = ilt::restore_video(clip.lr, *p.model, *p.vae, p.sched, opt, p.latent_scale);
    auto rep = metrics::evaluate(out, clip.hr, clip.motion);
    return json{{"psnr", rep.psnr}, {"warp_error", rep.warp_error}, {"flicker", rep.flicker}};
}

struct TrainArgs {
    std::string strategy = "pls3";
    fs::path data_root, out;
    int64_t steps = 300;
    double lr = 1e-4;
    int batch = 1;
    uint64_t seed = 0;
    bool resume = false;
    fs::path vae_ckpt;
    int64_t vae_steps = 200;
    std::string vae_variant = "te3dvae";
    bool no_msta = false;
    double msta_alpha = 0.5;
    std::string msta_form = "corrected";
    int timesteps = 50;
    int64_t patch = 64;
};

int cmd_train(const TrainArgs& a) {
    std::string started = timestamp();
    fs::create_directories(a.out);
    auto strategy = trainer::strategy_from_string(a.strategy);
    auto cur = trainer::make_curriculum(strategy, a.steps, a.lr, a.batch);
    auto sets = load_dataset_root(a.data_root, cur);
    auto eval_ds = load_eval_dataset(a.data_root);

    denoiser::DenoiserConfig mc;
    mc.msta_enabled = !a.no_msta;
    mc.msta_alpha = a.msta_alpha;
    mc.msta_form = a.msta_form == "printed" ? denoiser::MstaForm::Printed
                                            : denoiser::MstaForm::Corrected;
    denoiser::DenoiserModel model(mc, a.seed);

    vae::VaeConfig vc;
    vc.variant = vae::variant_from_string(a.vae_variant);
    vae::VideoVae v(vc, a.seed ^ 0xae0ull);
    if (!a.vae_ckpt.empty()) {
        v = load_vae_checkpoint(a.vae_ckpt);
    } else {
        const auto& s0 = cur.stages.front();
        trainer::VaeTrainOptions vo;
        vo.steps = a.vae_steps;
        vo.seed = a.seed ^ 0xae0ull;
        std::cerr << "no --vae-ckpt given; pretraining a small autoencoder (" << vo.steps
                  << " steps)\n";
        trainer::train_vae(v, sets.get(s0.tier, s0.quality), vo);
        save_vae_checkpoint(a.out / "vae.ckpt", v, json{{"steps", vo.steps}});
    }

    trainer::Trainer::Options to;
    to.timesteps = a.timesteps;
    to.patch = a.patch;
    to.out_dir = a.out;
    trainer::Trainer tr(model, v, to);

    std::optional<trainer::TrainState> resume;
    if (a.resume) {
        for (int si = static_cast<int>(cur.stages.size()); si >= 1 && !resume; --si) {
            fs::path ck = a.out / (a.strategy + "_stage" + std::to_string(si) + ".ckpt");
            if (fs::exists(ck)) {
                std::cerr << "resuming from " << ck << "\n";
                resume = tr.load_checkpoint(ck);
            }
        }
        if (!resume) std::cerr << "no stage checkpoint found; starting fresh\n";
    }

    auto res = tr.run_curriculum(cur, sets, eval_ds, a.seed, resume);
    // The last stage checkpoint doubles as the final state; give it a
    // stable name.
    if (!res.stage_checkpoints.empty())
        fs::copy_file(res.stage_checkpoints.back(), a.out / "final.ckpt",
                      fs::copy_options::overwrite_existing);
    io::write_json(a.out / "report.json", res.report);
    json cfg{{"strategy", a.strategy}, {"steps", a.steps},   {"lr", a.lr},
             {"batch", a.batch},       {"model", mc.to_json()}, {"vae", vc.to_json()},
             {"timesteps", a.timesteps}, {"patch", a.patch}};
    write_run_manifest(a.out, "train", cfg, a.seed, started);
    std::cout << "eval: " << res.report.at("eval").dump() << "\n";
    return 0;
}

int cmd_train_vae(const fs::path& data_dir, const fs::path& out, const std::string& variant,
                  int64_t steps, double lr, uint64_t seed) {
    std::string started = timestamp();
    fs::create_directories(out);
    auto ds = open_dataset_with_hint(data_dir);
    vae::VaeConfig vc;
    vc.variant = vae::variant_from_string(variant);
    vae::VideoVae v(vc, seed);
    trainer::VaeTrainOptions vo;
    vo.steps = steps;
    vo.lr = lr;
    vo.seed = seed;
    auto history = trainer::train_vae(v, ds, vo);
    save_vae_checkpoint(out / "vae.ckpt", v, json{{"steps", steps}});
    json hist = json::array();
    for (const auto& p : history) hist.push_back(json::array({p.step, p.loss}));
    io::write_json(out / "report.json",
                   json{{"component", "vae"}, {"variant", variant}, {"history", hist}});
    json cfg{{"component", "vae"}, {"variant", variant}, {"steps", steps}, {"lr", lr}};
    write_run_manifest(out, "train", cfg, seed, started);
    std::cout << "vae trained: final loss " << (history.empty() ? 0.0 : history.back().loss)
              << "\n";
    return 0;
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"latent video super-resolution toolkit"};
    app.require_subcommand(1);

    // ---- gen-data ----
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic degraded video dataset");
    fs::path gd_config, gd_out;
    bool gd_force = false;
    std::string gd_tier = "complex", gd_quality = "base", gd_motion = "mixed";
    int gd_clips = 16;
    int64_t gd_frames = 32, gd_size = 64;
    uint64_t gd_seed = 0;
    gen->add_option("--config", gd_config, "dataset config JSON (overrides flags)");
    gen->add_option("--out", gd_out, "output directory")->required();
    gen->add_flag("--force", gd_force, "overwrite a non-empty output directory");
    gen->add_option("--tier", gd_tier, "degradation tier: bicubic_only|simple|complex");
    gen->add_option("--quality", gd_quality, "data quality: base|high");
    gen->add_option("--motion", gd_motion, "motion kind: translate|rotate|zoom|mixed");
    gen->add_option("--n-clips", gd_clips, "number of clips");
    gen->add_option("--frames", gd_frames, "frames per clip");
    gen->add_option("--size", gd_size, "HR clip height/width");
    gen->add_option("--seed", gd_seed, "dataset seed");
    gen->callback([&]() {
        std::string started = timestamp();
        if (fs::exists(gd_out) && !fs::is_empty(gd_out) && !gd_force)
            throw std::invalid_argument("output directory " + gd_out.string() +
                                        " is not empty; pass --force to overwrite");
        data::DatasetConfig cfg;
        if (!gd_config.empty()) {
            json j = io::read_json(gd_config);
            if (j.value("version", 1) != 1)
                throw std::invalid_argument("unsupported dataset config version");
            cfg = data::DatasetConfig::from_json(j);
        } else {
            cfg.n_clips = gd_clips;
            cfg.frames = gd_frames;
            cfg.motion = synth::motion_from_string(gd_motion);
            cfg.seed = gd_seed;
            cfg.degradation.tier = degradation::tier_from_string(gd_tier);
            if (gd_quality == "high") {
                cfg.high_quality = true;
                cfg.height = cfg.width = gd_size * 2;  // high tier: finer textures, 2x res
            } else if (gd_quality == "base") {
                cfg.height = cfg.width = gd_size;
            } else {
                throw std::invalid_argument("unknown quality: " + gd_quality);
            }
        }
        data::generate_dataset(cfg, gd_out);
        write_run_manifest(gd_out, "gen-data", cfg.to_json(), cfg.seed, started);
        std::cout << "wrote " << cfg.n_clips << " clips to " << gd_out << "\n";
    });

    // ---- train ----
    TrainArgs ta;
    std::string train_component = "diffusion";
    fs::path tv_data;
    auto* tr = app.add_subcommand("train", "train the denoiser (curriculum) or an autoencoder");
    tr->add_option("--component", train_component, "diffusion|vae");
    tr->add_option("--strategy", ta.strategy, "pls3|two_stage|direct");
    tr->add_option("--data-root", ta.data_root,
                   "root containing <tier>_<quality>/ datasets (and optional eval/)");
    tr->add_option("--data", tv_data, "single dataset dir (component=vae)");
    tr->add_option("--out", ta.out, "output directory")->required();
    tr->add_option("--steps", ta.steps, "total optimizer steps across all stages");
    tr->add_option("--lr", ta.lr, "learning rate");
    tr->add_option("--batch", ta.batch, "clips per step");
    tr->add_option("--seed", ta.seed, "run seed");
    tr->add_flag("--resume", ta.resume, "continue from the latest stage checkpoint");
    tr->add_option("--vae-ckpt", ta.vae_ckpt, "pretrained autoencoder checkpoint");
    tr->add_option("--vae-steps", ta.vae_steps, "autoencoder pretrain steps when no --vae-ckpt");
    tr->add_option("--vae-variant", ta.vae_variant, "vae2d|vae3d|te3dvae");
    tr->add_flag("--no-msta", ta.no_msta, "disable multi-scale temporal attention");
    tr->add_option("--msta-alpha", ta.msta_alpha, "multi-scale fusion weight");
    tr->add_option("--msta-form", ta.msta_form, "corrected|printed fusion form");
    tr->add_option("--timesteps", ta.timesteps, "diffusion timesteps");
    tr->add_option("--patch", ta.patch, "HR training crop");
    tr->callback([&]() {
        if (train_component == "vae") {
            if (tv_data.empty()) throw std::invalid_argument("component=vae requires --data");
            cmd_train_vae(tv_data, ta.out, ta.vae_variant, ta.steps, ta.lr, ta.seed);
        } else if (train_component == "diffusion") {
            if (ta.data_root.empty()) throw std::invalid_argument("train requires --data-root");
            cmd_train(ta);
        } else {
            throw std::invalid_argument("unknown component: " + train_component);
        }
    });

    // ---- restore ----
    auto* rs = app.add_subcommand("restore", "restore a low-resolution clip");
    fs::path rs_input, rs_ckpt, rs_out, rs_hr, rs_motion;
    ilt::RestoreOptions ro;
    bool rs_no_ilt = false, rs_dump = false;
    rs->add_option("--input", rs_input, "LR clip tensor file")->required();
    rs->add_option("--ckpt", rs_ckpt, "training checkpoint")->required();
    rs->add_option("--out", rs_out, "output directory")->required();
    rs->add_option("--window", ro.window_len, "frames per window");
    rs->add_option("--overlap", ro.overlap, "overlapping frames between windows");
    rs->add_option("--steps", ro.sample_steps, "sampler steps");
    rs->add_option("--seed", ro.seed, "noise seed");
    rs->add_flag("--no-ilt", rs_no_ilt, "disable overlap fusion (ablation)");
    rs->add_flag("--fuse-at-end", ro.fuse_at_end, "fuse once after sampling instead of per step");
    rs->add_flag("--independent-noise", ro.independent_noise, "no cross-window noise reuse");
    rs->add_flag("--freenoise", ro.freenoise_reorder, "reorder the base noise pool for the tail");
    rs->add_option("--hr", rs_hr, "ground-truth HR clip for metrics");
    rs->add_option("--motion", rs_motion, "ground-truth motion field for metrics");
    rs->add_flag("--dump-frames", rs_dump, "write per-frame PPM images");
    rs->callback([&]() {
        std::string started = timestamp();
        fs::create_directories(rs_out);
        ro.ilt = !rs_no_ilt;
        auto p = load_pipeline(rs_ckpt);
        Tensor lr = io::load_tensor(rs_input);
        auto plan = ilt::plan_windows(lr.dim(0), ro.window_len, ro.overlap);
        std::cout << "plan: " << plan.windows.size() << " windows of " << plan.window_len
                  << " frames, stride " << plan.stride << "\n";
        Tensor out = ilt::restore_video(lr, *p.model, *p.vae, p.sched, ro, p.latent_scale);
        io::save_tensor(rs_out / "restored.ten", out);
        if (rs_dump)
            for (int64_t f = 0; f < out.dim(0); ++f) {
                char name[32];
                std::snprintf(name, sizeof(name), "frame_%03lld.ppm",
                              static_cast<long long>(f));
                io::save_ppm_frame(rs_out / name, out, f);
            }
        if (!rs_hr.empty()) {
            Tensor hr = io::load_tensor(rs_hr);
            std::optional<Tensor> motion;
            if (!rs_motion.empty()) motion = io::load_tensor(rs_motion);
            auto rep = metrics::evaluate(out, hr, motion);
            json mj{{"psnr", rep.psnr},
                    {"warp_error", rep.warp_error},
                    {"flicker", rep.flicker},
                    {"per_frame_psnr", rep.per_frame_psnr}};
            io::write_json(rs_out / "metrics.json", mj);
            std::cout << "psnr " << rep.psnr << "  warp_error " << rep.warp_error << "\n";
        }
        json cfg{{"input", rs_input.string()},   {"ckpt", rs_ckpt.string()},
                 {"window", ro.window_len},      {"overlap", ro.overlap},
                 {"steps", ro.sample_steps},     {"ilt", ro.ilt},
                 {"fuse_at_end", ro.fuse_at_end},{"independent_noise", ro.independent_noise},
                 {"freenoise", ro.freenoise_reorder}};
        write_run_manifest(rs_out, "restore", cfg, ro.seed, started);
    });

    // ---- evaluate ----
    auto* ev = app.add_subcommand("evaluate", "fixed-protocol eval of a checkpoint");
    fs::path ev_ckpt, ev_data, ev_out;
    int ev_n = 8, ev_steps = 8;
    uint64_t ev_seed = 0;
    ev->add_option("--ckpt", ev_ckpt, "training checkpoint")->required();
    ev->add_option("--data", ev_data, "evaluation dataset dir")->required();
    ev->add_option("--out", ev_out, "output directory")->required();
    ev->add_option("--n", ev_n, "clips to evaluate");
    ev->add_option("--steps", ev_steps, "sampler steps");
    ev->add_option("--seed", ev_seed, "eval seed");
    ev->callback([&]() {
        std::string started = timestamp();
        fs::create_directories(ev_out);
        auto p = load_pipeline(ev_ckpt);
        auto ds = open_dataset_with_hint(ev_data);
        trainer::Trainer::Options to;
        to.timesteps = p.sched.timesteps;
        to.schedule = p.sched.kind;
        trainer::Trainer t(*p.model, *p.vae, to);
        auto rep = t.evaluate(ds, ev_n, ev_steps, ev_seed, p.latent_scale);
        json rj{{"loss", rep.loss}, {"psnr", rep.psnr}, {"n_clips", ev_n}};
        io::write_json(ev_out / "eval.json", rj);
        json cfg{{"ckpt", ev_ckpt.string()}, {"data", ev_data.string()}, {"n", ev_n},
                 {"steps", ev_steps}};
        write_run_manifest(ev_out, "evaluate", cfg, ev_seed, started);
        std::cout << rj.dump() << "\n";
    });

    // ---- ablate ----
    auto* ab = app.add_subcommand("ablate", "component toggle grids with a summary table");
    std::string ab_suite;
    fs::path ab_root, ab_out, ab_ckpt;
    int64_t ab_steps = 120, ab_vae_steps = 150;
    uint64_t ab_seed = 0;
    ab->add_option("--suite", ab_suite, "pls|ilt|arch")->required();
    ab->add_option("--data-root", ab_root, "dataset root (pls, arch)");
    ab->add_option("--out", ab_out, "output directory")->required();
    ab->add_option("--ckpt", ab_ckpt, "trained checkpoint (ilt suite)");
    ab->add_option("--steps", ab_steps, "training steps per run");
    ab->add_option("--vae-steps", ab_vae_steps, "autoencoder pretrain steps");
    ab->add_option("--seed", ab_seed, "suite seed");
    ab->callback([&]() {
        std::string started = timestamp();
        fs::create_directories(ab_out);
        json rows = json::array();
        std::string scatter = "label,psnr,warp_error\n";

        if (ab_suite == "ilt") {
            if (ab_ckpt.empty())
                throw std::invalid_argument(
                    "suite=ilt needs a trained checkpoint; plan: (1) gen-data for "
                    "simple_base/complex_base[/complex_high], (2) latvsr train --strategy pls3, "
                    "(3) re-run with --ckpt <out>/final.ckpt");
            auto p = load_pipeline(ab_ckpt);
            auto clip = make_ablation_clip(ab_seed);
            ilt::RestoreOptions with;
            with.seed = ab_seed;
            ilt::RestoreOptions without = with;
            without.ilt = false;
            without.independent_noise = true;
            json jw = restore_and_measure(p, clip, with);
            json jo = restore_and_measure(p, clip, without);
            rows.push_back(json{{"arch", true}, {"pls", true}, {"ilt", false}, {"metrics", jo}});
            rows.push_back(json{{"arch", true}, {"pls", true}, {"ilt", true}, {"metrics", jw}});
            for (const auto& r : rows)
                scatter += (r.at("ilt").get<bool>() ? std::string("ilt") : std::string("no_ilt")) +
                           "," + std::to_string(r.at("metrics").at("psnr").get<double>()) + "," +
                           std::to_string(r.at("metrics").at("warp_error").get<double>()) + "\n";
        } else if (ab_suite == "pls") {
            if (ab_root.empty()) throw std::invalid_argument("suite=pls requires --data-root");
            // one shared pretrained autoencoder so only the curriculum varies
            vae::VaeConfig vc;
            vae::VideoVae shared_vae(vc, ab_seed ^ 0xae0ull);
            auto cur0 = trainer::make_curriculum(trainer::Strategy::Pls3, ab_steps, 1e-4, 1);
            auto sets0 = load_dataset_root(ab_root, cur0);
            trainer::VaeTrainOptions vo;
            vo.steps = ab_vae_steps;
            vo.seed = ab_seed ^ 0xae0ull;
            trainer::train_vae(shared_vae,
                               sets0.get(cur0.stages[0].tier, cur0.stages[0].quality), vo);
            auto vae_weights = shared_vae.params().snapshot();
            auto eval_ds = load_eval_dataset(ab_root);

            for (auto strat : {trainer::Strategy::Direct, trainer::Strategy::TwoStage,
                               trainer::Strategy::Pls3}) {
                auto cur = trainer::make_curriculum(strat, ab_steps, 1e-4, 1);
                auto sets = load_dataset_root(ab_root, cur);
                denoiser::DenoiserConfig mc;
                denoiser::DenoiserModel model(mc, ab_seed);
                vae::VideoVae v(vc, ab_seed ^ 0xae0ull);
                v.params().load(vae_weights);
                trainer::Trainer::Options to;
                to.out_dir = ab_out / trainer::to_string(strat);
                trainer::Trainer t(model, v, to);
                auto res = t.run_curriculum(cur, sets, eval_ds, ab_seed);
                rows.push_back(json{{"arch", true},
                                    {"pls", trainer::to_string(strat)},
                                    {"ilt", true},
                                    {"metrics", res.report.at("eval")}});
                scatter += trainer::to_string(strat) + "," +
                           std::to_string(res.report.at("eval").at("psnr").get<double>()) +
                           ",\n";
            }
        } else if (ab_suite == "arch") {
            if (ab_root.empty()) throw std::invalid_argument("suite=arch requires --data-root");
            auto cur0 = trainer::make_curriculum(trainer::Strategy::Direct, ab_steps, 1e-4, 1);
            auto sets = load_dataset_root(ab_root, cur0);
            auto eval_ds = load_eval_dataset(ab_root);
            auto clip = make_ablation_clip(ab_seed);
            for (bool msta : {false, true})
                for (std::string variant : {std::string("vae2d"), std::string("te3dvae")}) {
                    vae::VaeConfig vc;
                    vc.variant = vae::variant_from_string(variant);
                    vae::VideoVae v(vc, ab_seed ^ 0xae0ull);
                    trainer::VaeTrainOptions vo;
                    vo.steps = ab_vae_steps;
                    vo.seed = ab_seed ^ 0xae0ull;
                    trainer::train_vae(v, sets.get(cur0.stages[0].tier, cur0.stages[0].quality),
                                       vo);
                    denoiser::DenoiserConfig mc;
                    mc.msta_enabled = msta;
                    denoiser::DenoiserModel model(mc, ab_seed);
                    std::string label = (msta ? "msta" : "plain") + std::string("_") + variant;
                    trainer::Trainer::Options to;
                    to.out_dir = ab_out / label;
                    trainer::Trainer t(model, v, to);
                    auto res = t.run_curriculum(cur0, sets, eval_ds, ab_seed);
                    LoadedPipeline p;
                    p.model = std::make_unique<denoiser::DenoiserModel>(std::move(model));
                    p.vae = std::make_unique<vae::VideoVae>(std::move(v));
                    p.sched = t.schedule();
                    p.latent_scale = res.report.at("latent_scale").get<double>();
                    ilt::RestoreOptions roo;
                    roo.seed = ab_seed;
                    json m = restore_and_measure(p, clip, roo);
                    json eval = res.report.at("eval");
                    eval["warp_error"] = m.at("warp_error");
                    rows.push_back(json{{"arch", json{{"msta", msta}, {"vae", variant}}},
                                        {"pls", "direct"},
                                        {"ilt", true},
                                        {"metrics", eval}});
                    scatter += label + "," + std::to_string(m.at("psnr").get<double>()) + "," +
                               std::to_string(m.at("warp_error").get<double>()) + "\n";
                }
        } else {
            throw std::invalid_argument("unknown suite: " + ab_suite);
        }

        io::write_json(ab_out / "report.json", json{{"suite", ab_suite}, {"rows", rows}});
        io::atomic_write(ab_out / "scatter.csv", scatter);
        json cfg{{"suite", ab_suite}, {"steps", ab_steps}};
        write_run_manifest(ab_out, "ablate", cfg, ab_seed, started);
        std::cout << rows.dump(2) << "\n";
    });

    CLI11_PARSE(app, argc, argv);
    return 0;
}

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::invalid_argument& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::domain_error& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitContract;
    }
}
