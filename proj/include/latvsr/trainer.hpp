#pragma once

#include <filesystem>

#include "latvsr/data.hpp"
#include "latvsr/denoiser.hpp"
#include "latvsr/vae.hpp"

namespace latvsr::trainer {

using json = nlohmann::json;

enum class Trainable { TemporalOnly, All };
enum class DataQuality { Base, High };
enum class Strategy { Pls3, TwoStage, Direct };

Strategy strategy_from_string(const std::string& s);
std::string to_string(Strategy s);
std::string to_string(Trainable t);
std::string to_string(DataQuality q);

struct StageConfig {
    std::string name;
    degradation::Tier tier = degradation::Tier::Simple;
    Trainable trainable = Trainable::TemporalOnly;
    DataQuality quality = DataQuality::Base;
    int64_t iterations = 1000;
    double lr = 1e-4;
    int batch = 1;

    void validate() const;
    json to_json() const;
    static StageConfig from_json(const json& j);
};

// Fixed stage recipes per strategy:
//   pls3:      simple/temporal_only/base -> complex/temporal_only/base -> complex/all/high
//   two_stage: simple/temporal_only/base -> complex/all/base
//   direct:    complex/temporal_only/base
// Strategy comparisons use equal total step budgets, split across stages.
struct Curriculum {
    Strategy strategy = Strategy::Pls3;
    std::vector<StageConfig> stages;
    void validate() const;
};

Curriculum make_curriculum(Strategy strategy, int64_t total_steps, double lr, int batch);

struct MetricPoint {
    int64_t step = 0;
    double loss = 0.0;
};

struct TrainState {
    int stage_index = 0;
    int64_t global_step = 0;
    double latent_scale = 0.0;  // 0 = not yet calibrated
    std::vector<MetricPoint> history;
    nn::AdamW opt;
    Rng rng{0};
};

// Named dataset handles keyed by (tier, quality); run_stage pulls the pair
// its stage demands and fails loudly when it is missing or mislabeled.
class DatasetSet {
public:
    void add(degradation::Tier tier, DataQuality quality, data::Dataset ds);
    const data::Dataset& get(degradation::Tier tier, DataQuality quality) const;
    static std::string key(degradation::Tier tier, DataQuality quality);

private:
    std::map<std::string, data::Dataset> sets_;
};

struct EvalReport {
    double loss = 0.0;
    double psnr = 0.0;
};

struct CurriculumResult {
    std::vector<std::filesystem::path> stage_checkpoints;
    json report;
};

class Trainer {
public:
    struct Options {
        int64_t stride_min = 1, stride_max = 3;
        int64_t patch = 64;  // HR crop
        int timesteps = 50;
        diffusion::ScheduleKind schedule = diffusion::ScheduleKind::Cosine;
        double tau_fraction = 0.15;  // conditioning noise drawn from early steps
        std::filesystem::path out_dir;  // diagnostics + stage checkpoints
    };

    Trainer(denoiser::DenoiserModel& model, vae::VideoVae& vae, Options opt);

    const diffusion::NoiseSchedule& schedule() const { return sched_; }

    TrainState run_stage(const StageConfig& stage, const DatasetSet& datasets, TrainState state);
    // Resuming re-enters at state.stage_index; earlier stages are skipped.
    CurriculumResult run_curriculum(const Curriculum& cur, const DatasetSet& datasets,
                                    const data::Dataset& eval_ds, uint64_t seed,
                                    std::optional<TrainState> resume = std::nullopt);

    // Fixed-protocol evaluation: deterministic crops, deterministic loss
    // timesteps, short plain sampling, PSNR against the HR crop.
    EvalReport evaluate(const data::Dataset& eval_ds, int n_clips, int sample_steps, uint64_t seed,
                        double latent_scale = 0.0) const;

    void save_checkpoint(const std::filesystem::path& path, const TrainState& state,
                         const json& extra_meta = json::object()) const;
    TrainState load_checkpoint(const std::filesystem::path& path);

    double calibrate_latent_scale(const data::Dataset& ds, uint64_t seed) const;

private:
    double train_step(const StageConfig& stage, const data::Dataset& ds, TrainState& state);
    Tensor encode_scaled(const Tensor& hr, double scale) const;

    denoiser::DenoiserModel& model_;
    vae::VideoVae& vae_;
    Options opt_;
    diffusion::NoiseSchedule sched_;
};

// Autoencoder training loop (used for the variant comparison and for
// producing the small decoder the diffusion experiments run through).
struct VaeTrainOptions {
    int64_t steps = 500;
    double lr = 1e-3;
    int64_t patch = 32;  // HR crop; clips autoencode at this size
    int64_t stride_min = 1, stride_max = 2;
    uint64_t seed = 0;
};

std::vector<MetricPoint> train_vae(vae::VideoVae& model, const data::Dataset& ds,
                                   const VaeTrainOptions& opt);

}  // namespace latvsr::trainer
