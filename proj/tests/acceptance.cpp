// Acceptance gate: one self-contained check per release criterion, each
// printing a single PASS/FAIL line. The process exits nonzero if any fail.
//
// argv[1] (optional) is the path to the command-line binary, used by the
// reproducibility criterion; it defaults to ./latvsr in the working directory.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "latvsr/ilt.hpp"
#include "latvsr/io.hpp"
#include "latvsr/metrics.hpp"
#include "latvsr/trainer.hpp"

using namespace latvsr;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

int g_failures = 0;

void report(int idx, const std::string& name, bool ok, const std::string& detail) {
    std::ostringstream line;
    line << "[" << (idx < 10 ? " " : "") << idx << "] " << (ok ? "PASS" : "FAIL") << "  " << name;
    if (!detail.empty()) line << "  (" << detail << ")";
    std::cout << line.str() << std::endl;
    if (!ok) ++g_failures;
}

void run(int idx, const std::string& name, const std::function<std::pair<bool, std::string>()>& fn) {
    try {
        auto [ok, detail] = fn();
        report(idx, name, ok, detail);
    } catch (const std::exception& e) {
        report(idx, name, false, std::string("exception: ") + e.what());
    }
}

double median3(double a, double b, double c) {
    std::vector<double> v{a, b, c};
    std::sort(v.begin(), v.end());
    return v[1];
}

std::string fmt(double x) {
    std::ostringstream s;
    s.precision(5);
    s << x;
    return s.str();
}

// ---- shared toy fixtures ----------------------------------------------------

denoiser::DenoiserConfig toy_denoiser_config() {
    denoiser::DenoiserConfig cfg;
    cfg.base_channels = 4;
    cfg.depth = 2;
    cfg.temporal_heads = 2;
    cfg.latent_channels = 2;
    cfg.cond_channels = 3;
    cfg.embed_dim = 4;
    cfg.time_embed_dim = 8;
    return cfg;
}

vae::VaeConfig toy_vae_config(vae::Variant variant = vae::Variant::Vae2d) {
    vae::VaeConfig cfg;
    cfg.variant = variant;
    cfg.base_channels = 4;
    cfg.latent_channels = 2;
    cfg.downscale = 4;
    return cfg;
}

trainer::Trainer::Options toy_trainer_options(int64_t patch = 32) {
    trainer::Trainer::Options opt;
    opt.stride_min = 1;
    opt.stride_max = 2;
    opt.patch = patch;
    opt.timesteps = 50;
    return opt;
}

struct Fixtures {
    fs::path root;
    fs::path simple_base, complex_base, complex_high, eval_set, translate_set;
    std::map<std::string, Tensor> vae_weights;  // pretrained, shared by all arms
};

fs::path make_ds(const fs::path& dir, degradation::Tier tier, bool high, int n_clips,
                 synth::Motion motion, uint64_t seed) {
    data::DatasetConfig cfg;
    cfg.n_clips = n_clips;
    cfg.frames = 12;
    cfg.height = 64;
    cfg.width = 64;
    cfg.motion = motion;
    cfg.high_quality = high;
    cfg.degradation.tier = tier;
    cfg.seed = seed;
    data::generate_dataset(cfg, dir);
    return dir;
}

Fixtures build_fixtures() {
    Fixtures fx;
    fx.root = fs::current_path() / "acceptance_out";
    fs::remove_all(fx.root);
    fs::create_directories(fx.root);
    using degradation::Tier;
    fx.simple_base = make_ds(fx.root / "ds_simple_base", Tier::Simple, false, 8,
                             synth::Motion::Mixed, 101);
    fx.complex_base = make_ds(fx.root / "ds_complex_base", Tier::Complex, false, 8,
                              synth::Motion::Mixed, 102);
    fx.complex_high = make_ds(fx.root / "ds_complex_high", Tier::Complex, true, 8,
                              synth::Motion::Mixed, 103);
    fx.eval_set = make_ds(fx.root / "ds_eval", Tier::Complex, false, 16, synth::Motion::Mixed, 104);
    fx.translate_set = make_ds(fx.root / "ds_translate", Tier::Complex, false, 8,
                               synth::Motion::Translate, 105);

    // one shared decoder so every training arm sees identical reconstruction
    vae::VideoVae v(toy_vae_config(), 7);
    trainer::VaeTrainOptions vopt;
    vopt.steps = 200;
    vopt.lr = 1e-3;
    vopt.patch = 16;
    vopt.seed = 7;
    trainer::train_vae(v, data::Dataset::open(fx.simple_base), vopt);
    fx.vae_weights = v.params().snapshot();
    return fx;
}

}  // namespace

// ---- criteria ---------------------------------------------------------------

static std::pair<bool, std::string> c1_fusion_weights() {
    auto w = ilt::fusion_weights(4);
    bool ok = w.size() == 4 && w[0] == 1.0 && w[3] == 0.0 &&
              std::abs(w[1] - 2.0 / 3.0) < 1e-15 && std::abs(w[2] - 1.0 / 3.0) < 1e-15;
    for (int64_t p = 2; p <= 9; ++p) {
        auto a = ilt::fusion_weights(p);
        ok = ok && a.front() == 1.0 && a.back() == 0.0;
        for (size_t i = 1; i < a.size(); ++i) ok = ok && a[i] < a[i - 1];
    }
    return {ok, "P=4 -> [1, 2/3, 1/3, 0], endpoints exact for P in [2,9]"};
}

static std::pair<bool, std::string> c2_v_algebra() {
    auto s = diffusion::build_schedule(diffusion::ScheduleKind::Cosine, 1000);
    Rng rng(2);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        int t = static_cast<int>(rng.uniform_int(0, s.timesteps - 1));
        Tensor z = rng.normal_tensor({2, 3});
        Tensor eps = rng.normal_tensor({2, 3});
        Tensor z_t = diffusion::forward_noise(z, t, eps, s).z;
        Tensor v = diffusion::v_target(z, eps, t, s);
        auto [zr, er] = diffusion::invert_v(z_t, v, t, s);
        worst = std::max({worst, zr.max_abs_diff(z), er.max_abs_diff(eps)});
    }
    return {worst < 1e-5, "max inversion error " + fmt(worst) + " over 1000 trials (< 1e-5)"};
}

static std::pair<bool, std::string> c3_perfect_denoiser() {
    auto s = diffusion::build_schedule(diffusion::ScheduleKind::Cosine, 50);
    Rng rng(3);
    Tensor z = rng.normal_tensor({2, 4, 8, 8});
    Tensor init = rng.normal_tensor(z.shape());
    auto oracle = [&](const Tensor& z_t, int t) {
        double a = s.alpha[t], sg = s.sigma[t];
        Tensor v(z_t.shape());
        for (int64_t i = 0; i < z_t.numel(); ++i) {
            double eps = sg == 0.0 ? 0.0 : (z_t[i] - a * z[i]) / sg;
            v[i] = a * eps - sg * z[i];
        }
        return v;
    };
    Tensor out = diffusion::sample(oracle, init, s, 50);
    double err = out.max_abs_diff(z);
    return {err < 1e-4, "L-inf recovery error " + fmt(err) + " (< 1e-4)"};
}

static std::pair<bool, std::string> c4_freeze(const Fixtures& fx) {
    trainer::DatasetSet sets;
    sets.add(degradation::Tier::Simple, trainer::DataQuality::Base,
             data::Dataset::open(fx.simple_base));
    denoiser::DenoiserModel model(toy_denoiser_config(), 4);
    vae::VideoVae v(toy_vae_config(), 0);
    v.params().load(fx.vae_weights);
    trainer::Trainer tr(model, v, toy_trainer_options(16));

    auto before = model.params().snapshot();
    trainer::StageConfig stage;
    stage.name = "stage1";
    stage.tier = degradation::Tier::Simple;
    stage.trainable = trainer::Trainable::TemporalOnly;
    stage.iterations = 50;
    stage.lr = 1e-3;
    trainer::TrainState state;
    state.rng = Rng(44);
    state = tr.run_stage(stage, sets, state);

    auto groups = model.param_groups();
    double spatial_drift = 0.0;
    for (const auto& n : groups.spatial)
        spatial_drift =
            std::max(spatial_drift, model.params().params().at(n)->value.max_abs_diff(before.at(n)));
    double temporal_drift = 0.0;
    for (const auto& n : groups.temporal)
        temporal_drift = std::max(temporal_drift,
                                  model.params().params().at(n)->value.max_abs_diff(before.at(n)));
    bool ok = spatial_drift == 0.0 && temporal_drift > 0.0;
    return {ok, "after 50 steps: spatial drift " + fmt(spatial_drift) + " (bitwise 0), temporal drift " +
                    fmt(temporal_drift) + " (> 0)"};
}

static std::pair<bool, std::string> c5_strategy_ordering(const Fixtures& fx) {
    using trainer::Strategy;
    trainer::DatasetSet sets;
    sets.add(degradation::Tier::Simple, trainer::DataQuality::Base,
             data::Dataset::open(fx.simple_base));
    sets.add(degradation::Tier::Complex, trainer::DataQuality::Base,
             data::Dataset::open(fx.complex_base));
    sets.add(degradation::Tier::Complex, trainer::DataQuality::High,
             data::Dataset::open(fx.complex_high));
    auto eval_ds = data::Dataset::open(fx.eval_set);

    const int64_t kBudget = 240;  // matched total steps per strategy
    json curves = json::object();
    auto run_arm = [&](Strategy strat, uint64_t seed) {
        denoiser::DenoiserModel model(toy_denoiser_config(), 1000 + seed);
        vae::VideoVae v(toy_vae_config(), 0);
        v.params().load(fx.vae_weights);
        trainer::Trainer tr(model, v, toy_trainer_options(32));
        auto cur = trainer::make_curriculum(strat, kBudget, 1e-3, 1);
        auto res = tr.run_curriculum(cur, sets, eval_ds, seed);
        curves[trainer::to_string(strat)]["seed" + std::to_string(seed)] =
            json{{"history", res.report.at("history")}, {"eval", res.report.at("eval")}};
        return res.report.at("eval").at("psnr").get<double>();
    };

    std::vector<double> pls3, direct, two_stage;
    for (uint64_t seed : {1, 2, 3}) {
        pls3.push_back(run_arm(Strategy::Pls3, seed));
        direct.push_back(run_arm(Strategy::Direct, seed));
        // the two-stage middle point: measured and emitted, not gated on
        two_stage.push_back(run_arm(Strategy::TwoStage, seed));
    }
    double mp = median3(pls3[0], pls3[1], pls3[2]);
    double md = median3(direct[0], direct[1], direct[2]);
    double mt = median3(two_stage[0], two_stage[1], two_stage[2]);
    io::write_json(fx.root / "strategy_curves.json",
                   json{{"budget_steps", kBudget},
                        {"median_eval_psnr",
                         json{{"pls3", mp}, {"two_stage", mt}, {"direct", md}}},
                        {"curves", curves}});
    return {mp > md, "median eval PSNR over 3 seeds: pls3 " + fmt(mp) + " vs direct " + fmt(md) +
                         " (two_stage " + fmt(mt) + "); curves in acceptance_out/strategy_curves.json"};
}

static std::pair<bool, std::string> c6_ilt_ordering(const Fixtures& fx) {
    // short direct training gives the temporal blocks signal
    trainer::DatasetSet sets;
    sets.add(degradation::Tier::Complex, trainer::DataQuality::Base,
             data::Dataset::open(fx.translate_set));
    denoiser::DenoiserModel model(toy_denoiser_config(), 6);
    vae::VideoVae v(toy_vae_config(), 0);
    v.params().load(fx.vae_weights);
    trainer::Trainer tr(model, v, toy_trainer_options(32));
    trainer::StageConfig stage;
    stage.tier = degradation::Tier::Complex;
    stage.trainable = trainer::Trainable::TemporalOnly;
    stage.iterations = 80;
    stage.lr = 1e-3;
    trainer::TrainState state;
    state.rng = Rng(66);
    state = tr.run_stage(stage, sets, state);

    synth::ClipSpec spec;
    spec.frames = 32;
    spec.height = 64;
    spec.width = 64;
    spec.motion = synth::Motion::Translate;
    spec.seed = 660;
    auto clip = synth::make_clip(spec);
    degradation::DegradationConfig dcfg;
    Rng drng(661);
    Tensor lr = degradation::degrade(clip.hr, dcfg, drng).lr;

    std::vector<double> with_ilt, without_ilt;
    for (uint64_t seed : {11, 12, 13}) {
        ilt::RestoreOptions with;
        with.window_len = 8;
        with.overlap = 4;
        with.sample_steps = 4;
        with.seed = seed;
        auto without = with;
        without.ilt = false;
        without.independent_noise = true;
        Tensor a = ilt::restore_video(lr, model, v, tr.schedule(), with, state.latent_scale);
        Tensor b = ilt::restore_video(lr, model, v, tr.schedule(), without, state.latent_scale);
        with_ilt.push_back(metrics::warp_error(a, clip.motion_field));
        without_ilt.push_back(metrics::warp_error(b, clip.motion_field));
    }
    double mw = median3(with_ilt[0], with_ilt[1], with_ilt[2]);
    double mo = median3(without_ilt[0], without_ilt[1], without_ilt[2]);
    return {mw < mo, "median warp error over 3 seeds: ILT " + fmt(mw) + " vs no-fusion/indep-noise " +
                         fmt(mo)};
}

static std::pair<bool, std::string> c7_degenerate_equivalence(const Fixtures& fx) {
    denoiser::DenoiserModel model(toy_denoiser_config(), 70);
    vae::VideoVae v(toy_vae_config(), 0);
    v.params().load(fx.vae_weights);
    auto sched = diffusion::build_schedule(diffusion::ScheduleKind::Cosine, 50);

    Rng r(71);
    Tensor lr = r.normal_tensor({8, 3, 8, 8});
    for (int64_t i = 0; i < lr.numel(); ++i) lr[i] = 0.5 + 0.1 * lr[i];

    ilt::RestoreOptions opt;
    opt.window_len = 8;
    opt.overlap = 4;
    opt.sample_steps = 4;
    opt.seed = 72;
    Tensor windowed = ilt::restore_video(lr, model, v, sched, opt, 1.0);

    ilt::NoisePool pool({2, 8, 8}, opt.seed);
    Tensor init({8, 2, 8, 8});
    int64_t frame = init.numel() / 8;
    for (int64_t j = 0; j < 8; ++j)
        std::copy_n(pool.get(j).data(), frame, init.data() + j * frame);
    diffusion::Conditioning cond;
    cond.lr_latent = lr;
    cond.tau = 0;
    cond.embed = nn::timestep_embedding(0, model.config().embed_dim);
    auto fn = [&](const Tensor& z_t, int t) { return model.forward(z_t, cond, t); };
    Tensor plain = v.decode(diffusion::sample(fn, init, sched, opt.sample_steps));

    double diff = windowed.max_abs_diff(plain);
    return {diff == 0.0, "T = window_len: windowed vs plain sampling diff " + fmt(diff) +
                             " (bitwise 0)"};
}

static std::pair<bool, std::string> c8_msta_contracts() {
    auto cfg = toy_denoiser_config();
    nn::ParamStore ps;
    Rng rng(80);
    denoiser::MstaBlock block(ps, "b", 4, cfg, rng);
    Rng zr(81);
    for (auto& [name, var] : ps.params())
        if (var->value.max_abs() == 0.0) {
            Tensor t = zr.normal_tensor(var->value.shape());
            for (int64_t i = 0; i < t.numel(); ++i) t[i] *= 0.1;
            var->value = t;
        }
    Rng er(82);
    auto emb = ag::constant(er.normal_tensor({1, cfg.time_embed_dim}));

    bool shapes_ok = true;
    for (int64_t T : {1, 2, 5, 8})
        for (auto [H, W] : {std::pair<int64_t, int64_t>{4, 4}, {6, 10}, {5, 7}}) {
            Rng r(static_cast<uint64_t>(T * 1000 + H * 10 + W));
            auto h = ag::constant(r.normal_tensor({T, 4, H, W}));
            auto out = block(h, emb);
            shapes_ok = shapes_ok && out->value.shape() == h->value.shape() &&
                        out->value.all_finite();
        }

    // alpha = 0 vs the single-scale branch, identical shared weights
    auto zcfg = cfg;
    zcfg.msta_alpha = 0.0;
    nn::ParamStore zps;
    Rng zrng(83);
    denoiser::MstaBlock zero_alpha(zps, "b", 4, zcfg, zrng);
    auto scfg = zcfg;
    scfg.msta_enabled = false;
    nn::ParamStore sps;
    Rng srng(83);
    denoiser::MstaBlock single(sps, "b", 4, scfg, srng);
    for (auto& [name, var] : sps.params()) var->value = zps.params().at(name)->value;
    Rng xr(84);
    Tensor x = xr.normal_tensor({3, 4, 6, 6});
    double alpha_diff =
        zero_alpha(ag::constant(x), emb)->value.max_abs_diff(single(ag::constant(x), emb)->value);

    // gradient vs central finite differences
    Rng gr(85);
    Tensor gx = gr.normal_tensor({2, 4, 4, 4});
    auto gv = ag::param(gx);
    auto loss = ag::mean(ag::square(block(gv, emb)));
    ag::backward(loss);
    const double h = 1e-5;
    double worst_rel = 0.0;
    for (int64_t i = 0; i < gx.numel(); i += 5) {
        auto eval_at = [&](double d) {
            Tensor t = gx;
            t[i] += d;
            return ag::mean(ag::square(block(ag::constant(t), emb)))->value[0];
        };
        double fd = (eval_at(h) - eval_at(-h)) / (2 * h);
        worst_rel = std::max(worst_rel,
                             std::abs(gv->grad[i] - fd) / std::max(1.0, std::abs(fd)));
    }

    // Equal weights in separately allocated tensors can differ by one ulp in
    // matmul outputs (alignment-dependent summation order), hence <= 1e-12
    // instead of a bitwise check.
    bool ok = shapes_ok && alpha_diff <= 1e-12 && worst_rel < 1e-3;
    return {ok, "shape grid ok=" + std::string(shapes_ok ? "yes" : "no") + ", alpha=0 diff " +
                    fmt(alpha_diff) + " (<= 1e-12), worst grad rel err " + fmt(worst_rel) +
                    " (< 1e-3)"};
}

static std::pair<bool, std::string> c9_vae_variant_ordering(const Fixtures& fx) {
    synth::ClipSpec spec;
    spec.frames = 12;
    spec.height = 32;
    spec.width = 32;
    spec.motion = synth::Motion::Translate;
    spec.seed = 900;
    auto probe = synth::make_clip(spec);
    auto ds = data::Dataset::open(fx.translate_set);

    auto measure = [&](vae::Variant variant, uint64_t seed) {
        vae::VideoVae v(toy_vae_config(variant), 9000 + seed);
        trainer::VaeTrainOptions opt;
        opt.steps = 1000;
        opt.lr = 1e-3;
        opt.patch = 16;
        opt.seed = seed;
        trainer::train_vae(v, ds, opt);
        // The decoder's downstream input is a sampled latent, not a clean
        // encoding, so probe with frame-incoherent latent noise: a temporal
        // decoder smooths the flicker, a per-frame decoder passes it through.
        Tensor z = v.encode(probe.hr);
        double m = 0.0, m2 = 0.0;
        for (int64_t i = 0; i < z.numel(); ++i) {
            m += z[i];
            m2 += z[i] * z[i];
        }
        m /= static_cast<double>(z.numel());
        double sd = std::sqrt(std::max(m2 / static_cast<double>(z.numel()) - m * m, 0.0));
        Rng nr(seed ^ 0x90153ull);
        for (int64_t i = 0; i < z.numel(); ++i) z[i] += 0.5 * sd * nr.normal();
        Tensor recon = v.decode(z);
        return metrics::warp_error(recon, probe.motion_field);
    };

    std::vector<double> te, flat;
    for (uint64_t seed : {21, 22, 23}) {
        te.push_back(measure(vae::Variant::Te3dVae, seed));
        flat.push_back(measure(vae::Variant::Vae2d, seed));
    }
    double mt = median3(te[0], te[1], te[2]);
    double mf = median3(flat[0], flat[1], flat[2]);
    return {mt <= mf, "median warp error over 3 seeds after equal budgets: te3dvae " + fmt(mt) +
                          " vs vae2d " + fmt(mf)};
}

static std::pair<bool, std::string> c10_metric_oracles() {
    Rng rng(10);
    Tensor a({3, 3, 8, 8});
    for (int64_t i = 0; i < a.numel(); ++i) a[i] = 0.3 + 0.4 * rng.uniform();
    Tensor b = a;
    for (int64_t i = 0; i < b.numel(); ++i) b[i] += 0.1;
    double p = metrics::psnr(a, b);

    synth::ClipSpec spec;
    spec.frames = 6;
    spec.height = 32;
    spec.width = 32;
    spec.motion = synth::Motion::Translate;
    spec.velocity = std::make_pair(1.0, 0.0);
    spec.seed = 10;
    auto sc = synth::make_clip(spec);
    double w = metrics::warp_error(sc.hr, sc.motion_field);

    bool ok = std::abs(p - 20.0) < 1e-12 && w < 1e-6;
    return {ok, "constant 0.1 offset -> " + fmt(p) + " dB (= 20), exact-motion warp error " +
                    fmt(w) + " (< 1e-6)"};
}

static std::pair<bool, std::string> c11_cli_reproducibility(const Fixtures& fx,
                                                           const std::string& cli) {
    if (!fs::exists(cli)) return {false, "command-line binary not found at " + cli};
    auto q = [](const fs::path& p) { return "\"" + p.string() + "\""; };
    fs::path root = fx.root / "cli";
    fs::create_directories(root);

    // generation determinism under an identical config
    std::string gen_common = " gen-data --tier simple --n-clips 2 --frames 10 --size 32 --seed 5";
    for (const char* d : {"gen_a", "gen_b"}) {
        int rc = std::system((q(cli) + gen_common + " --out " + q(root / d) + " >/dev/null").c_str());
        if (rc != 0) return {false, "gen-data exited with " + std::to_string(rc)};
    }
    bool gen_ok = io::hash_file(root / "gen_a" / "manifest.jsonl") ==
                  io::hash_file(root / "gen_b" / "manifest.jsonl");
    for (int i = 0; i < 2 && gen_ok; ++i) {
        char id[16];
        std::snprintf(id, sizeof(id), "clip%04d", i);
        for (const char* sfx : {"_hr.ten", "_lr.ten"})
            gen_ok = gen_ok && io::hash_file(root / "gen_a" / (std::string(id) + sfx)) ==
                                   io::hash_file(root / "gen_b" / (std::string(id) + sfx));
    }

    // restoration determinism from a manifest-described run
    denoiser::DenoiserModel model(toy_denoiser_config(), 110);
    vae::VideoVae v(toy_vae_config(), 0);
    v.params().load(fx.vae_weights);
    trainer::Trainer tr(model, v, toy_trainer_options(16));
    trainer::TrainState state;
    state.latent_scale = 1.0;
    tr.save_checkpoint(root / "model.ckpt", state);

    Rng r(111);
    Tensor lr = r.normal_tensor({10, 3, 16, 16});
    for (int64_t i = 0; i < lr.numel(); ++i) lr[i] = 0.5 + 0.1 * lr[i];
    io::save_tensor(root / "lr.ten", lr);

    std::string rest_common = " restore --input " + q(root / "lr.ten") + " --ckpt " +
                              q(root / "model.ckpt") + " --steps 2 --seed 9";
    for (const char* d : {"res_a", "res_b"}) {
        int rc =
            std::system((q(cli) + rest_common + " --out " + q(root / d) + " >/dev/null").c_str());
        if (rc != 0) return {false, "restore exited with " + std::to_string(rc)};
    }
    bool res_ok = io::hash_file(root / "res_a" / "restored.ten") ==
                  io::hash_file(root / "res_b" / "restored.ten");

    return {gen_ok && res_ok,
            std::string("gen-data hashes ") + (gen_ok ? "match" : "differ") + ", restore hashes " +
                (res_ok ? "match" : "differ")};
}

int main(int argc, char** argv) {
    std::string cli = argc > 1 ? argv[1] : "./latvsr";
    std::cout << "acceptance suite\n----------------" << std::endl;

    run(1, "fusion-weight exactness", c1_fusion_weights);
    run(2, "v-prediction algebra inversion", c2_v_algebra);
    run(3, "perfect-denoiser sampling", c3_perfect_denoiser);

    Fixtures fx = build_fixtures();
    run(4, "stage-1 freeze correctness", [&] { return c4_freeze(fx); });
    run(5, "training strategy ordering", [&] { return c5_strategy_ordering(fx); });
    run(6, "windowed-inference fusion ordering", [&] { return c6_ilt_ordering(fx); });
    run(7, "single-window degenerate equivalence", [&] { return c7_degenerate_equivalence(fx); });
    run(8, "multi-scale temporal block contracts", c8_msta_contracts);
    run(9, "autoencoder variant ordering", [&] { return c9_vae_variant_ordering(fx); });
    run(10, "metric oracles", c10_metric_oracles);
    run(11, "command-line reproducibility", [&] { return c11_cli_reproducibility(fx, cli); });

    std::cout << "----------------\n"
              << (g_failures == 0 ? "all criteria passed"
                                  : std::to_string(g_failures) + " criterion(s) failed")
              << std::endl;
    return g_failures == 0 ? 0 : 1;
}
