#pragma once

#include <filesystem>
#include <vector>

#include "latvsr/degradation.hpp"
#include "latvsr/synth.hpp"

namespace latvsr::data {

using json = nlohmann::json;

struct DatasetConfig {
    int n_clips = 16;
    int64_t frames = 32;
    int64_t height = 64;
    int64_t width = 64;
    synth::Motion motion = synth::Motion::Mixed;
    bool high_quality = false;
    degradation::DegradationConfig degradation;
    uint64_t seed = 0;

    json to_json() const;
    static DatasetConfig from_json(const json& j);
};

// Directory layout: manifest.jsonl (one record per clip) plus per-clip
// tensor files for HR, LR, and the ground-truth motion field.
struct ClipRecord {
    std::string id;
    std::filesystem::path hr_file, lr_file, motion_file;
    degradation::Tier tier;
    json recipe;
    json motion_meta;
};

class Dataset {
public:
    static Dataset open(const std::filesystem::path& dir);

    const std::filesystem::path& dir() const { return dir_; }
    const std::vector<ClipRecord>& clips() const { return clips_; }
    const json& config() const { return config_; }
    size_t size() const { return clips_.size(); }

    Tensor load_hr(size_t i) const;
    Tensor load_lr(size_t i) const;
    Tensor load_motion(size_t i) const;

private:
    std::filesystem::path dir_;
    std::vector<ClipRecord> clips_;
    json config_;
};

// Deterministic under (config.seed); per-clip work derives child seeds.
void generate_dataset(const DatasetConfig& cfg, const std::filesystem::path& out_dir);

struct TrainingSample {
    Tensor hr;  // (8, 3, patch, patch)
    Tensor lr;  // (8, 3, patch/4, patch/4)
    size_t clip_index = 0;
    int64_t stride = 1;
    int64_t start_frame = 0;
    int64_t crop_row = 0, crop_col = 0;
};

inline constexpr int64_t kClipFrames = 8;

// 8-frame temporally strided, spatially co-located HR/LR crops. The LR crop
// origin is exactly the HR origin divided by the x4 scale.
TrainingSample sample_training_clip(const Dataset& ds, int64_t stride_min, int64_t stride_max,
                                    int64_t patch, Rng& rng);

}  // namespace latvsr::data
