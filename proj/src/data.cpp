#include "latvsr/data.hpp"

#include <cstdio>
#include <fstream>

#include "latvsr/io.hpp"

namespace latvsr::data {

namespace fs = std::filesystem;

json DatasetConfig::to_json() const {
    return json{{"n_clips", n_clips},
                {"frames", frames},
                {"height", height},
                {"width", width},
                {"motion", synth::to_string(motion)},
                {"high_quality", high_quality},
                {"degradation", degradation.to_json()},
                {"seed", seed}};
}

DatasetConfig DatasetConfig::from_json(const json& j) {
    DatasetConfig c;
    c.n_clips = j.at("n_clips").get<int>();
    c.frames = j.value("frames", 32);
    c.height = j.value("height", 64);
    c.width = j.value("width", 64);
    c.motion = synth::motion_from_string(j.value("motion", std::string("mixed")));
    c.high_quality = j.value("high_quality", false);
    c.degradation = degradation::DegradationConfig::from_json(j.at("degradation"));
    c.seed = j.value("seed", 0ull);
    if (c.n_clips < 1) throw std::invalid_argument("dataset config: n_clips must be >= 1");
    return c;
}

void generate_dataset(const DatasetConfig& cfg, const fs::path& out_dir) {
    if (cfg.n_clips < 1) throw std::invalid_argument("generate_dataset: n_clips must be >= 1");
    cfg.degradation.validate();
    fs::create_directories(out_dir);
    std::string manifest;
    for (int i = 0; i < cfg.n_clips; ++i) {
        synth::ClipSpec spec;
        spec.frames = cfg.frames;
        spec.height = cfg.height;
        spec.width = cfg.width;
        spec.motion = cfg.motion;
        spec.high_quality = cfg.high_quality;
        spec.seed = cfg.seed * 1000003ull + static_cast<uint64_t>(i);
        synth::SynthClip clip = synth::make_clip(spec);

        Rng rng = Rng::child(cfg.seed, 0xde6ull * 1000003ull + static_cast<uint64_t>(i));
        degradation::DegradedPair pair = degradation::degrade(clip.hr, cfg.degradation, rng);

        char idbuf[16];
        std::snprintf(idbuf, sizeof(idbuf), "clip%04d", i);
        std::string id(idbuf);
        io::save_tensor(out_dir / (id + "_hr.ten"), pair.hr);
        io::save_tensor(out_dir / (id + "_lr.ten"), pair.lr);
        io::save_tensor(out_dir / (id + "_motion.ten"), clip.motion_field);

        json rec{{"id", id},
                 {"hr", id + "_hr.ten"},
                 {"lr", id + "_lr.ten"},
                 {"motion", id + "_motion.ten"},
                 {"tier", degradation::to_string(cfg.degradation.tier)},
                 {"recipe", pair.recipe},
                 {"motion_meta", clip.meta}};
        manifest += rec.dump() + "\n";
    }
    io::atomic_write(out_dir / "manifest.jsonl", manifest);
    io::write_json(out_dir / "dataset.json", cfg.to_json());
}

Dataset Dataset::open(const fs::path& dir) {
    Dataset ds;
    ds.dir_ = dir;
    fs::path manifest = dir / "manifest.jsonl";
    if (!fs::exists(manifest))
        throw std::runtime_error("dataset manifest not found: " + manifest.string() +
                                 " (run gen-data first)");
    std::ifstream f(manifest);
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        json rec = json::parse(line);
        ClipRecord c;
        c.id = rec.at("id").get<std::string>();
        c.hr_file = dir / rec.at("hr").get<std::string>();
        c.lr_file = dir / rec.at("lr").get<std::string>();
        c.motion_file = dir / rec.at("motion").get<std::string>();
        c.tier = degradation::tier_from_string(rec.at("tier").get<std::string>());
        c.recipe = rec.at("recipe");
        c.motion_meta = rec.value("motion_meta", json::object());
        ds.clips_.push_back(std::move(c));
    }
    if (fs::exists(dir / "dataset.json")) ds.config_ = io::read_json(dir / "dataset.json");
    return ds;
}

Tensor Dataset::load_hr(size_t i) const { return io::load_tensor(clips_.at(i).hr_file); }
Tensor Dataset::load_lr(size_t i) const { return io::load_tensor(clips_.at(i).lr_file); }
Tensor Dataset::load_motion(size_t i) const { return io::load_tensor(clips_.at(i).motion_file); }

namespace {
Tensor crop(const Tensor& clip, int64_t t0, int64_t stride, int64_t frames, int64_t r0, int64_t c0,
            int64_t size) {
    Tensor out({frames, clip.dim(1), size, size});
    for (int64_t f = 0; f < frames; ++f)
        for (int64_t c = 0; c < clip.dim(1); ++c)
            for (int64_t y = 0; y < size; ++y)
                for (int64_t x = 0; x < size; ++x)
                    out.at4(f, c, y, x) = clip.at4(t0 + f * stride, c, r0 + y, c0 + x);
    return out;
}
}  // namespace

TrainingSample sample_training_clip(const Dataset& ds, int64_t stride_min, int64_t stride_max,
                                    int64_t patch, Rng& rng) {
    if (ds.size() == 0) throw std::runtime_error("sample_training_clip: empty dataset");
    if (stride_min < 1 || stride_max < stride_min)
        throw std::invalid_argument("sample_training_clip: bad stride range");
    if (patch % 4 != 0) throw std::invalid_argument("sample_training_clip: patch must be /4");
    const int kMaxRetries = 16;
    for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
        size_t ci = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(ds.size()) - 1));
        Tensor hr = ds.load_hr(ci);
        Tensor lr = ds.load_lr(ci);
        int64_t frames = hr.dim(0);
        int64_t stride = rng.uniform_int(stride_min, stride_max);
        int64_t span = (kClipFrames - 1) * stride + 1;
        if (span > frames) continue;  // clip too short at this stride
        int64_t t0 = rng.uniform_int(0, frames - span);
        int64_t size = std::min(patch, std::min(hr.dim(2), hr.dim(3)));
        size -= size % 4;
        // HR crop origins aligned to the x4 lattice so LR origin = HR/4.
        int64_t rmax = (hr.dim(2) - size) / 4, cmax = (hr.dim(3) - size) / 4;
        int64_t r0 = rng.uniform_int(0, rmax) * 4;
        int64_t c0 = rng.uniform_int(0, cmax) * 4;
        TrainingSample s;
        s.hr = crop(hr, t0, stride, kClipFrames, r0, c0, size);
        s.lr = crop(lr, t0, stride, kClipFrames, r0 / 4, c0 / 4, size / 4);
        s.clip_index = ci;
        s.stride = stride;
        s.start_frame = t0;
        s.crop_row = r0;
        s.crop_col = c0;
        return s;
    }
    throw std::runtime_error("sample_training_clip: no clip long enough after bounded retries");
}

}  // namespace latvsr::data
