#include "latvsr/trainer.hpp"

#include <cmath>
#include <memory>

#include "latvsr/io.hpp"
#include "latvsr/metrics.hpp"

namespace latvsr::trainer {

Strategy strategy_from_string(const std::string& s) {
    if (s == "pls3") return Strategy::Pls3;
    if (s == "two_stage") return Strategy::TwoStage;
    if (s == "direct") return Strategy::Direct;
    throw std::invalid_argument("unknown strategy: " + s);
}

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::Pls3: return "pls3";
        case Strategy::TwoStage: return "two_stage";
        case Strategy::Direct: return "direct";
    }
    throw std::logic_error("bad strategy");
}

std::string to_string(Trainable t) {
    return t == Trainable::TemporalOnly ? "temporal_only" : "all";
}

std::string to_string(DataQuality q) { return q == DataQuality::Base ? "base" : "high"; }

namespace {
Trainable trainable_from_string(const std::string& s) {
    if (s == "temporal_only") return Trainable::TemporalOnly;
    if (s == "all") return Trainable::All;
    throw std::invalid_argument("unknown trainable scope: " + s);
}
DataQuality quality_from_string(const std::string& s) {
    if (s == "base") return DataQuality::Base;
    if (s == "high") return DataQuality::High;
    throw std::invalid_argument("unknown data quality: " + s);
}
}  // namespace

void StageConfig::validate() const {
    if (iterations < 1) throw std::invalid_argument("stage config: iterations must be >= 1");
    if (lr <= 0) throw std::invalid_argument("stage config: lr must be > 0");
    if (batch < 1) throw std::invalid_argument("stage config: batch must be >= 1");
}

json StageConfig::to_json() const {
    return json{{"name", name},
                {"tier", degradation::to_string(tier)},
                {"trainable", to_string(trainable)},
                {"quality", to_string(quality)},
                {"iterations", iterations},
                {"lr", lr},
                {"batch", batch}};
}

StageConfig StageConfig::from_json(const json& j) {
    StageConfig s;
    s.name = j.value("name", std::string());
    s.tier = degradation::tier_from_string(j.at("tier").get<std::string>());
    s.trainable = trainable_from_string(j.at("trainable").get<std::string>());
    s.quality = quality_from_string(j.value("quality", std::string("base")));
    s.iterations = j.value("iterations", int64_t{1000});
    s.lr = j.value("lr", 1e-4);
    s.batch = j.value("batch", 1);
    s.validate();
    return s;
}

void Curriculum::validate() const {
    using degradation::Tier;
    struct Expect {
        Tier tier;
        Trainable tr;
        DataQuality q;
    };
    std::vector<Expect> want;
    switch (strategy) {
        case Strategy::Pls3:
            want = {{Tier::Simple, Trainable::TemporalOnly, DataQuality::Base},
                    {Tier::Complex, Trainable::TemporalOnly, DataQuality::Base},
                    {Tier::Complex, Trainable::All, DataQuality::High}};
            break;
        case Strategy::TwoStage:
            want = {{Tier::Simple, Trainable::TemporalOnly, DataQuality::Base},
                    {Tier::Complex, Trainable::All, DataQuality::Base}};
            break;
        case Strategy::Direct:
            want = {{Tier::Complex, Trainable::TemporalOnly, DataQuality::Base}};
            break;
    }
    if (stages.size() != want.size())
        throw std::invalid_argument("curriculum: wrong stage count for strategy " +
                                    to_string(strategy));
    for (size_t i = 0; i < stages.size(); ++i) {
        stages[i].validate();
        if (stages[i].tier != want[i].tier || stages[i].trainable != want[i].tr ||
            stages[i].quality != want[i].q)
            throw std::invalid_argument("curriculum: stage " + std::to_string(i + 1) +
                                        " does not match the " + to_string(strategy) + " recipe");
    }
}

Curriculum make_curriculum(Strategy strategy, int64_t total_steps, double lr, int batch) {
    if (total_steps < 1) throw std::invalid_argument("make_curriculum: total_steps must be >= 1");
    Curriculum cur;
    cur.strategy = strategy;
    auto stage = [&](const char* name, degradation::Tier tier, Trainable tr, DataQuality q,
                     int64_t iters) {
        StageConfig s;
        s.name = name;
        s.tier = tier;
        s.trainable = tr;
        s.quality = q;
        s.iterations = iters;
        s.lr = lr;
        s.batch = batch;
        return s;
    };
    using degradation::Tier;
    switch (strategy) {
        case Strategy::Pls3: {
            int64_t a = total_steps / 3;
            if (a < 1) throw std::invalid_argument("make_curriculum: budget too small for 3 stages");
            cur.stages = {
                stage("stage1", Tier::Simple, Trainable::TemporalOnly, DataQuality::Base, a),
                stage("stage2", Tier::Complex, Trainable::TemporalOnly, DataQuality::Base, a),
                stage("stage3", Tier::Complex, Trainable::All, DataQuality::High,
                      total_steps - 2 * a)};
            break;
        }
        case Strategy::TwoStage: {
            int64_t a = total_steps / 2;
            if (a < 1) throw std::invalid_argument("make_curriculum: budget too small for 2 stages");
            cur.stages = {
                stage("stage1", Tier::Simple, Trainable::TemporalOnly, DataQuality::Base, a),
                stage("stage2", Tier::Complex, Trainable::All, DataQuality::Base, total_steps - a)};
            break;
        }
        case Strategy::Direct:
            cur.stages = {stage("stage1", Tier::Complex, Trainable::TemporalOnly,
                                DataQuality::Base, total_steps)};
            break;
    }
    cur.validate();
    return cur;
}

std::string DatasetSet::key(degradation::Tier tier, DataQuality quality) {
    return degradation::to_string(tier) + "/" + to_string(quality);
}

void DatasetSet::add(degradation::Tier tier, DataQuality quality, data::Dataset ds) {
    // Trust but verify: the dataset's own manifest must agree with the slot.
    if (ds.config().contains("degradation")) {
        auto t = degradation::tier_from_string(
            ds.config().at("degradation").at("tier").get<std::string>());
        if (t != tier)
            throw std::invalid_argument("dataset tier (" + degradation::to_string(t) +
                                        ") does not match slot " + key(tier, quality));
    }
    sets_[key(tier, quality)] = std::move(ds);
}

const data::Dataset& DatasetSet::get(degradation::Tier tier, DataQuality quality) const {
    auto it = sets_.find(key(tier, quality));
    if (it == sets_.end())
        throw std::invalid_argument("no dataset registered for " + key(tier, quality));
    return it->second;
}

Trainer::Trainer(denoiser::DenoiserModel& model, vae::VideoVae& vae, Options opt)
    : model_(model), vae_(vae), opt_(std::move(opt)) {
    sched_ = diffusion::build_schedule(opt_.schedule, opt_.timesteps);
}

Tensor Trainer::encode_scaled(const Tensor& hr, double scale) const {
    Tensor z = vae_.encode(hr);
    for (int64_t i = 0; i < z.numel(); ++i) z[i] *= scale;
    return z;
}

double Trainer::calibrate_latent_scale(const data::Dataset& ds, uint64_t seed) const {
    Rng rng = Rng::child(seed, 0x5ca1eull);
    auto s = data::sample_training_clip(ds, opt_.stride_min, opt_.stride_max, opt_.patch, rng);
    Tensor z = vae_.encode(s.hr);
    double m = 0.0, m2 = 0.0;
    for (int64_t i = 0; i < z.numel(); ++i) {
        m += z[i];
        m2 += z[i] * z[i];
    }
    m /= static_cast<double>(z.numel());
    m2 /= static_cast<double>(z.numel());
    double sd = std::sqrt(std::max(m2 - m * m, 0.0));
    return 1.0 / std::max(sd, 1e-3);
}

double Trainer::train_step(const StageConfig& stage, const data::Dataset& ds, TrainState& state) {
    model_.params().zero_grad();
    ag::Var acc;
    const int tau_max =
        std::max(0, static_cast<int>(opt_.tau_fraction * sched_.timesteps) - 1);
    for (int b = 0; b < stage.batch; ++b) {
        auto s = data::sample_training_clip(ds, opt_.stride_min, opt_.stride_max, opt_.patch,
                                            state.rng);
        Tensor z = encode_scaled(s.hr, state.latent_scale);
        int tau = static_cast<int>(state.rng.uniform_int(0, tau_max));
        Tensor eps_lr = state.rng.normal_tensor(s.lr.shape());
        Tensor x_tau = diffusion::forward_noise(s.lr, tau, eps_lr, sched_).z;
        int t = static_cast<int>(state.rng.uniform_int(0, sched_.timesteps - 1));
        Tensor eps = state.rng.normal_tensor(z.shape());
        Tensor z_t = diffusion::forward_noise(z, t, eps, sched_).z;
        Tensor embed = nn::timestep_embedding(tau, model_.config().embed_dim);
        auto pred = model_.forward_ag(ag::constant(z_t), x_tau, t, embed);
        auto loss = diffusion::diffusion_loss_ag(pred, z, eps, t, sched_);
        acc = acc ? ag::add(acc, loss) : loss;
    }
    auto total = stage.batch > 1 ? ag::scale(acc, 1.0 / stage.batch) : acc;
    double value = total->value[0];
    if (!std::isfinite(value)) {
        if (!opt_.out_dir.empty()) {
            std::filesystem::create_directories(opt_.out_dir);
            save_checkpoint(opt_.out_dir / "diagnostic.ckpt", state,
                            json{{"abort", "non-finite loss"}, {"stage", stage.to_json()}});
        }
        throw std::runtime_error("training aborted: non-finite loss at step " +
                                 std::to_string(state.global_step));
    }
    ag::backward(total);
    state.opt.step(model_.params());
    return value;
}

TrainState Trainer::run_stage(const StageConfig& stage, const DatasetSet& datasets,
                              TrainState state) {
    stage.validate();
    const data::Dataset& ds = datasets.get(stage.tier, stage.quality);
    if (state.latent_scale == 0.0) state.latent_scale = calibrate_latent_scale(ds, 0);

    std::map<std::string, bool> mask;
    auto groups = model_.param_groups();
    bool all = stage.trainable == Trainable::All;
    for (const auto& n : groups.spatial) mask[n] = all;
    for (const auto& n : groups.temporal) mask[n] = true;
    state.opt.set_trainable(mask);
    state.opt.set_lr(stage.lr);

    for (int64_t i = 0; i < stage.iterations; ++i) {
        double loss = train_step(stage, ds, state);
        ++state.global_step;
        state.history.push_back({state.global_step, loss});
    }
    ++state.stage_index;
    return state;
}

CurriculumResult Trainer::run_curriculum(const Curriculum& cur, const DatasetSet& datasets,
                                         const data::Dataset& eval_ds, uint64_t seed,
                                         std::optional<TrainState> resume) {
    cur.validate();
    for (const auto& s : cur.stages) datasets.get(s.tier, s.quality);  // fail before any work

    CurriculumResult res;
    TrainState state;
    if (resume) {
        state = std::move(*resume);
    } else {
        state.rng = Rng(seed);
        state.latent_scale =
            calibrate_latent_scale(datasets.get(cur.stages[0].tier, cur.stages[0].quality), seed);
    }

    json stage_reports = json::array();
    for (size_t si = 0; si < cur.stages.size(); ++si) {
        if (static_cast<int>(si) < state.stage_index) continue;  // already done pre-resume
        const auto& stage = cur.stages[si];
        int64_t first = state.global_step;
        state = run_stage(stage, datasets, state);
        double last_loss = state.history.empty() ? 0.0 : state.history.back().loss;
        double mean_loss = 0.0;
        int64_t n = 0;
        for (const auto& p : state.history)
            if (p.step > first) {
                mean_loss += p.loss;
                ++n;
            }
        if (n) mean_loss /= static_cast<double>(n);
        stage_reports.push_back(json{{"stage", stage.to_json()},
                                     {"steps", state.global_step},
                                     {"final_loss", last_loss},
                                     {"mean_loss", mean_loss}});
        if (!opt_.out_dir.empty()) {
            std::filesystem::create_directories(opt_.out_dir);
            auto path = opt_.out_dir / (to_string(cur.strategy) + "_" + stage.name + ".ckpt");
            save_checkpoint(path, state, json{{"stage", stage.to_json()}});
            res.stage_checkpoints.push_back(path);
        }
    }

    EvalReport er = evaluate(eval_ds, 8, 8, seed, state.latent_scale);
    json history = json::array();
    for (const auto& p : state.history) history.push_back(json::array({p.step, p.loss}));
    res.report = json{{"strategy", to_string(cur.strategy)},
                      {"stages", stage_reports},
                      {"eval", json{{"loss", er.loss}, {"psnr", er.psnr}}},
                      {"total_steps", state.global_step},
                      {"latent_scale", state.latent_scale},
                      {"history", history}};
    return res;
}

EvalReport Trainer::evaluate(const data::Dataset& eval_ds, int n_clips, int sample_steps,
                             uint64_t seed, double latent_scale) const {
    double scale = latent_scale > 0 ? latent_scale : calibrate_latent_scale(eval_ds, seed);
    double loss_acc = 0.0, psnr_acc = 0.0;
    for (int i = 0; i < n_clips; ++i) {
        Rng rng = Rng::child(seed, 0xe7a1ull + static_cast<uint64_t>(i));
        auto s = data::sample_training_clip(eval_ds, 1, 1, opt_.patch, rng);
        Tensor z = encode_scaled(s.hr, scale);

        // held-out loss at a deterministic timestep spread
        int t = static_cast<int>(rng.uniform_int(0, sched_.timesteps - 1));
        Tensor eps = rng.normal_tensor(z.shape());
        Tensor z_t = diffusion::forward_noise(z, t, eps, sched_).z;
        diffusion::Conditioning cond;
        cond.lr_latent = s.lr;  // tau = 0: sigma is exactly zero, clean conditioning
        cond.tau = 0;
        cond.embed = nn::timestep_embedding(0, model_.config().embed_dim);
        Tensor pred = model_.forward(z_t, cond, t);
        loss_acc += diffusion::diffusion_loss(pred, z, eps, t, sched_);

        // short deterministic sampling + decode
        Tensor init = rng.normal_tensor(z.shape());
        auto fn = [&](const Tensor& zt, int tt) { return model_.forward(zt, cond, tt); };
        Tensor z0 = diffusion::sample(fn, init, sched_, sample_steps);
        for (int64_t k = 0; k < z0.numel(); ++k) z0[k] /= scale;
        Tensor recon = vae_.decode(z0);
        psnr_acc += metrics::psnr(recon, s.hr);
    }
    EvalReport r;
    r.loss = loss_acc / n_clips;
    r.psnr = psnr_acc / n_clips;
    return r;
}

void Trainer::save_checkpoint(const std::filesystem::path& path, const TrainState& state,
                              const json& extra_meta) const {
    io::Checkpoint ck;
    ck.kind = "train_state";
    for (const auto& [name, t] : model_.params().snapshot()) ck.tensors["model." + name] = t;
    for (const auto& [name, t] : vae_.params().snapshot()) ck.tensors["vae." + name] = t;
    for (const auto& [name, mv] : const_cast<TrainState&>(state).opt.moments()) {
        ck.tensors["opt.m." + name] = mv.first;
        ck.tensors["opt.v." + name] = mv.second;
    }
    json history = json::array();
    for (const auto& p : state.history) history.push_back(json::array({p.step, p.loss}));
    ck.meta = json{{"model", model_.save_meta()},
                   {"vae", vae_.save_meta()},
                   {"schedule",
                    json{{"kind", diffusion::to_string(sched_.kind)},
                         {"timesteps", sched_.timesteps}}},
                   {"stage_index", state.stage_index},
                   {"global_step", state.global_step},
                   {"opt_step", const_cast<TrainState&>(state).opt.step_count()},
                   {"latent_scale", state.latent_scale},
                   {"rng", state.rng.serialize()},
                   {"history", history},
                   {"extra", extra_meta}};
    io::save_checkpoint(path, ck);
}

TrainState Trainer::load_checkpoint(const std::filesystem::path& path) {
    io::Checkpoint ck = io::load_checkpoint(path);
    if (ck.kind != "train_state")
        throw std::runtime_error("not a training checkpoint: " + path.string());
    std::map<std::string, Tensor> model_tensors, vae_tensors;
    TrainState state;
    for (auto& [name, t] : ck.tensors) {
        if (name.rfind("model.", 0) == 0)
            model_tensors[name.substr(6)] = t;
        else if (name.rfind("vae.", 0) == 0)
            vae_tensors[name.substr(4)] = t;
        else if (name.rfind("opt.m.", 0) == 0)
            state.opt.moments()[name.substr(6)].first = t;
        else if (name.rfind("opt.v.", 0) == 0)
            state.opt.moments()[name.substr(6)].second = t;
    }
    model_.params().load(model_tensors);
    if (!vae_tensors.empty()) vae_.params().load(vae_tensors);
    state.stage_index = ck.meta.at("stage_index").get<int>();
    state.global_step = ck.meta.at("global_step").get<int64_t>();
    state.opt.set_step_count(ck.meta.at("opt_step").get<int64_t>());
    state.latent_scale = ck.meta.at("latent_scale").get<double>();
    state.rng.deserialize(ck.meta.at("rng").get<std::string>());
    for (const auto& p : ck.meta.at("history"))
        state.history.push_back({p.at(0).get<int64_t>(), p.at(1).get<double>()});
    return state;
}

std::vector<MetricPoint> train_vae(vae::VideoVae& model, const data::Dataset& ds,
                                   const VaeTrainOptions& opt) {
    Rng rng(opt.seed);
    nn::AdamW::Config oc;
    oc.lr = opt.lr;
    nn::AdamW optim(oc);
    const bool adversarial = model.config().adv_weight > 0;
    std::unique_ptr<vae::TemporalDiscriminator> disc;
    std::unique_ptr<nn::AdamW> disc_optim;
    if (adversarial) {
        disc = std::make_unique<vae::TemporalDiscriminator>(opt.seed ^ 0xd15cull);
        disc_optim = std::make_unique<nn::AdamW>(oc);
    }

    std::vector<MetricPoint> history;
    for (int64_t step = 0; step < opt.steps; ++step) {
        auto s = data::sample_training_clip(ds, opt.stride_min, opt.stride_max, opt.patch, rng);
        model.params().zero_grad();
        auto fwd = model.forward_train(s.hr, rng);
        vae::VaeLossReport rep;
        auto loss = model.loss_ag(fwd, s.hr, &rep);
        if (adversarial) {
            auto adv = ag::scale(ag::mean((*disc)(fwd.recon)), -1.0);
            rep.adversarial = adv->value[0];
            rep.total += model.config().adv_weight * rep.adversarial;
            loss = ag::add(loss, ag::scale(adv, model.config().adv_weight));
        }
        if (!std::isfinite(rep.total))
            throw std::runtime_error("vae training aborted: non-finite loss at step " +
                                     std::to_string(step));
        ag::backward(loss);
        optim.step(model.params());

        if (adversarial) {
            disc->params().zero_grad();
            auto d_real = (*disc)(ag::constant(s.hr));
            auto d_fake = (*disc)(ag::constant(fwd.recon->value));
            auto d_loss = ag::add(ag::mean(ag::relu(ag::add_scalar(ag::scale(d_real, -1.0), 1.0))),
                                  ag::mean(ag::relu(ag::add_scalar(d_fake, 1.0))));
            ag::backward(d_loss);
            disc_optim->step(disc->params());
        }
        history.push_back({step + 1, rep.total});
    }
    return history;
}

}  // namespace latvsr::trainer
