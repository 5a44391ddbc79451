#include <doctest.h>

#include <filesystem>

#include "latvsr/io.hpp"
#include "latvsr/trainer.hpp"

using namespace latvsr;
using namespace latvsr::trainer;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    auto d = fs::temp_directory_path() / "latvsr_trainer_test" / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

fs::path make_dataset(const std::string& name, degradation::Tier tier, uint64_t seed) {
    data::DatasetConfig cfg;
    cfg.n_clips = 2;
    cfg.frames = 12;
    cfg.height = 32;
    cfg.width = 32;
    cfg.seed = seed;
    cfg.degradation.tier = tier;
    auto dir = fresh_dir(name);
    data::generate_dataset(cfg, dir);
    return dir;
}

denoiser::DenoiserConfig tiny_model_config() {
    denoiser::DenoiserConfig cfg;
    cfg.base_channels = 4;
    cfg.depth = 1;
    cfg.temporal_heads = 2;
    cfg.latent_channels = 2;
    cfg.cond_channels = 3;
    cfg.embed_dim = 4;
    cfg.time_embed_dim = 8;
    return cfg;
}

vae::VaeConfig tiny_vae_config() {
    vae::VaeConfig cfg;
    cfg.variant = vae::Variant::Vae2d;
    cfg.base_channels = 4;
    cfg.latent_channels = 2;
    cfg.downscale = 4;
    return cfg;
}

Trainer::Options tiny_options() {
    Trainer::Options opt;
    opt.stride_min = 1;
    opt.stride_max = 1;
    opt.patch = 16;
    opt.timesteps = 10;
    return opt;
}

}  // namespace

TEST_CASE("curricula follow the fixed stage recipes with equal budgets") {
    auto p = make_curriculum(Strategy::Pls3, 10, 1e-4, 1);
    REQUIRE(p.stages.size() == 3);
    CHECK(p.stages[0].tier == degradation::Tier::Simple);
    CHECK(p.stages[0].trainable == Trainable::TemporalOnly);
    CHECK(p.stages[0].quality == DataQuality::Base);
    CHECK(p.stages[1].tier == degradation::Tier::Complex);
    CHECK(p.stages[1].trainable == Trainable::TemporalOnly);
    CHECK(p.stages[2].trainable == Trainable::All);
    CHECK(p.stages[2].quality == DataQuality::High);
    CHECK(p.stages[0].iterations == 3);
    CHECK(p.stages[1].iterations == 3);
    CHECK(p.stages[2].iterations == 4);  // remainder lands in the last stage
    CHECK(p.stages[0].iterations + p.stages[1].iterations + p.stages[2].iterations == 10);

    auto t = make_curriculum(Strategy::TwoStage, 10, 1e-4, 1);
    REQUIRE(t.stages.size() == 2);
    CHECK(t.stages[0].iterations == 5);
    CHECK(t.stages[1].iterations == 5);
    CHECK(t.stages[1].trainable == Trainable::All);
    CHECK(t.stages[1].quality == DataQuality::Base);

    auto d = make_curriculum(Strategy::Direct, 10, 1e-4, 1);
    REQUIRE(d.stages.size() == 1);
    CHECK(d.stages[0].iterations == 10);
    CHECK(d.stages[0].tier == degradation::Tier::Complex);
    CHECK(d.stages[0].trainable == Trainable::TemporalOnly);

    CHECK_THROWS_AS(make_curriculum(Strategy::Pls3, 2, 1e-4, 1), std::invalid_argument);
    CHECK_THROWS_AS(make_curriculum(Strategy::Direct, 0, 1e-4, 1), std::invalid_argument);

    // recipe deviations are rejected
    auto bad = p;
    bad.stages[0].tier = degradation::Tier::Complex;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = p;
    bad.stages.pop_back();
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = t;
    bad.stages[1].quality = DataQuality::High;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    CHECK_THROWS_AS(strategy_from_string("four_stage"), std::invalid_argument);
    CHECK(to_string(strategy_from_string("pls3")) == "pls3");
}

TEST_CASE("dataset slots verify the manifest tier and fail loudly when missing") {
    auto simple_dir = make_dataset("slot_simple", degradation::Tier::Simple, 1);
    DatasetSet sets;
    CHECK_THROWS_AS(sets.add(degradation::Tier::Complex, DataQuality::Base,
                             data::Dataset::open(simple_dir)),
                    std::invalid_argument);
    sets.add(degradation::Tier::Simple, DataQuality::Base, data::Dataset::open(simple_dir));
    CHECK_NOTHROW(sets.get(degradation::Tier::Simple, DataQuality::Base));
    try {
        sets.get(degradation::Tier::Complex, DataQuality::High);
        FAIL("expected a missing-slot error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("complex/high") != std::string::npos);
    }
}

TEST_CASE("temporal-only stages leave every spatial parameter bitwise untouched") {
    auto simple_dir = make_dataset("freeze_simple", degradation::Tier::Simple, 2);
    DatasetSet sets;
    sets.add(degradation::Tier::Simple, DataQuality::Base, data::Dataset::open(simple_dir));

    denoiser::DenoiserModel model(tiny_model_config(), 3);
    vae::VideoVae vmodel(tiny_vae_config(), 4);
    Trainer tr(model, vmodel, tiny_options());

    auto before = model.params().snapshot();
    StageConfig stage;
    stage.name = "stage1";
    stage.tier = degradation::Tier::Simple;
    stage.trainable = Trainable::TemporalOnly;
    stage.iterations = 10;
    stage.lr = 1e-3;
    TrainState state;
    state.rng = Rng(5);
    state = tr.run_stage(stage, sets, state);

    auto groups = model.param_groups();
    for (const auto& n : groups.spatial)
        CHECK(model.params().params().at(n)->value.max_abs_diff(before.at(n)) == 0.0);
    double moved = 0.0;
    for (const auto& n : groups.temporal)
        moved = std::max(moved, model.params().params().at(n)->value.max_abs_diff(before.at(n)));
    CHECK(moved > 0.0);
    CHECK(state.global_step == 10);
    CHECK(state.stage_index == 1);
    CHECK(state.history.size() == 10);
    CHECK(state.latent_scale > 0.0);
}

TEST_CASE("one iteration means exactly one optimizer step") {
    auto dir = make_dataset("one_step", degradation::Tier::Complex, 6);
    DatasetSet sets;
    sets.add(degradation::Tier::Complex, DataQuality::Base, data::Dataset::open(dir));
    denoiser::DenoiserModel model(tiny_model_config(), 7);
    vae::VideoVae vmodel(tiny_vae_config(), 8);
    Trainer tr(model, vmodel, tiny_options());
    StageConfig stage;
    stage.tier = degradation::Tier::Complex;
    stage.iterations = 1;
    TrainState state;
    state.rng = Rng(9);
    state = tr.run_stage(stage, sets, state);
    CHECK(state.opt.step_count() == 1);
    CHECK(state.history.size() == 1);
}

TEST_CASE("save / load mid-run resumes the training trajectory") {
    auto dir = make_dataset("resume", degradation::Tier::Complex, 10);
    DatasetSet sets;
    sets.add(degradation::Tier::Complex, DataQuality::Base, data::Dataset::open(dir));
    auto ckpt_dir = fresh_dir("resume_out");

    StageConfig stage;
    stage.tier = degradation::Tier::Complex;
    stage.lr = 1e-3;

    // reference: four uninterrupted steps
    denoiser::DenoiserModel ref_model(tiny_model_config(), 11);
    vae::VideoVae ref_vae(tiny_vae_config(), 12);
    Trainer ref_tr(ref_model, ref_vae, tiny_options());
    TrainState ref_state;
    ref_state.rng = Rng(13);
    auto four = stage;
    four.iterations = 4;
    ref_state = ref_tr.run_stage(four, sets, ref_state);

    // interrupted: two steps, checkpoint, reload into fresh models, two more
    denoiser::DenoiserModel m1(tiny_model_config(), 11);
    vae::VideoVae v1(tiny_vae_config(), 12);
    Trainer t1(m1, v1, tiny_options());
    TrainState s1;
    s1.rng = Rng(13);
    auto two = stage;
    two.iterations = 2;
    s1 = t1.run_stage(two, sets, s1);
    s1.stage_index = 0;  // still mid-stage from the caller's point of view
    t1.save_checkpoint(ckpt_dir / "mid.ckpt", s1);

    denoiser::DenoiserModel m2(tiny_model_config(), 99);  // different init, overwritten by load
    vae::VideoVae v2(tiny_vae_config(), 98);
    Trainer t2(m2, v2, tiny_options());
    TrainState s2 = t2.load_checkpoint(ckpt_dir / "mid.ckpt");
    CHECK(s2.global_step == 2);
    s2 = t2.run_stage(two, sets, s2);

    CHECK(s2.global_step == ref_state.global_step);
    REQUIRE(s2.history.size() == ref_state.history.size());
    for (size_t i = 0; i < s2.history.size(); ++i)
        CHECK(s2.history[i].loss == doctest::Approx(ref_state.history[i].loss).epsilon(1e-9));
    for (const auto& [name, var] : ref_model.params().params())
        CHECK(m2.params().params().at(name)->value.max_abs_diff(var->value) < 1e-9);

    // a non-training checkpoint is refused
    io::Checkpoint other;
    other.kind = "vae";
    io::save_checkpoint(ckpt_dir / "other.ckpt", other);
    CHECK_THROWS(t2.load_checkpoint(ckpt_dir / "other.ckpt"));
}

TEST_CASE("full curriculum run: stage checkpoints, report, deterministic evaluation") {
    auto simple_dir = make_dataset("cur_simple", degradation::Tier::Simple, 14);
    auto complex_dir = make_dataset("cur_complex", degradation::Tier::Complex, 15);
    DatasetSet sets;
    sets.add(degradation::Tier::Simple, DataQuality::Base, data::Dataset::open(simple_dir));
    sets.add(degradation::Tier::Complex, DataQuality::Base, data::Dataset::open(complex_dir));
    auto eval_ds = data::Dataset::open(complex_dir);

    denoiser::DenoiserModel model(tiny_model_config(), 16);
    vae::VideoVae vmodel(tiny_vae_config(), 17);
    auto opt = tiny_options();
    opt.out_dir = fresh_dir("cur_out");
    Trainer tr(model, vmodel, opt);

    auto cur = make_curriculum(Strategy::TwoStage, 4, 1e-3, 1);
    auto res = tr.run_curriculum(cur, sets, eval_ds, 18);
    REQUIRE(res.stage_checkpoints.size() == 2);
    for (const auto& p : res.stage_checkpoints) CHECK(fs::exists(p));
    CHECK(res.report.at("strategy") == "two_stage");
    CHECK(res.report.at("total_steps") == 4);
    CHECK(res.report.at("stages").size() == 2);
    CHECK(res.report.at("history").size() == 4);
    CHECK(std::isfinite(res.report.at("eval").at("loss").get<double>()));
    CHECK(res.report.at("eval").at("psnr").get<double>() > 0.0);

    // a missing stage dataset fails before any training happens
    DatasetSet incomplete;
    incomplete.add(degradation::Tier::Simple, DataQuality::Base, data::Dataset::open(simple_dir));
    CHECK_THROWS_AS(tr.run_curriculum(cur, incomplete, eval_ds, 18), std::invalid_argument);

    // evaluation is deterministic under its seed
    auto e1 = tr.evaluate(eval_ds, 2, 2, 7);
    auto e2 = tr.evaluate(eval_ds, 2, 2, 7);
    CHECK(e1.loss == e2.loss);
    CHECK(e1.psnr == e2.psnr);
}

TEST_CASE("autoencoder training produces a full finite history") {
    auto dir = make_dataset("vae_train", degradation::Tier::Simple, 19);
    auto ds = data::Dataset::open(dir);
    vae::VideoVae model(tiny_vae_config(), 20);
    VaeTrainOptions opt;
    opt.steps = 8;
    opt.patch = 16;
    opt.stride_max = 1;
    opt.seed = 21;
    auto history = train_vae(model, ds, opt);
    REQUIRE(history.size() == 8);
    for (const auto& p : history) CHECK(std::isfinite(p.loss));
    CHECK(history.front().step == 1);
    CHECK(history.back().step == 8);
}
