#pragma once

#include "latvsr/denoiser.hpp"
#include "latvsr/vae.hpp"

namespace latvsr::ilt {

// Sliding-window layout over a long clip. Noise assignment is by absolute
// frame index, so any two windows covering the same frame start from the
// same initial noise by construction.
struct Window {
    int64_t start = 0;
    std::vector<int64_t> frames;
    std::vector<int64_t> noise;  // noise-pool indices, one per frame
};

struct WindowPlan {
    int64_t total_frames = 0;
    int64_t window_len = 0;
    int64_t stride = 0;
    int64_t overlap = 0;
    std::vector<Window> windows;

    // Actual overlap between windows i and i+1; the right-aligned last
    // window may overlap its predecessor by more than `overlap`.
    int64_t overlap_between(size_t i) const;
    void check() const;  // asserts coverage / noise-consistency invariants
};

WindowPlan plan_windows(int64_t total_frames, int64_t window_len, int64_t overlap);

// Lazily grown pool of per-frame latent noises; entry i is created once and
// never changes, regardless of request order.
class NoisePool {
public:
    NoisePool(std::vector<int64_t> frame_shape, uint64_t seed)
        : shape_(std::move(frame_shape)), seed_(seed) {}
    const Tensor& get(int64_t i);

private:
    std::vector<int64_t> shape_;
    uint64_t seed_;
    std::map<int64_t, Tensor> pool_;
};

// Position weights alpha_j = 1 - j/(P-1): 1 at the leading edge of the
// overlap, 0 at the trailing edge, strictly decreasing.
std::vector<double> fusion_weights(int64_t overlap);

struct WindowLatents {
    Tensor z;  // (window_len, C_z, h, w)
    int t = 0;  // current diffusion timestep
};

// fused[j] = alpha_j * earlier[s+j] + (1-alpha_j) * later[j], written back
// into both windows' overlap slots. Fusing across timesteps is undefined.
void fuse_overlap(WindowLatents& earlier, WindowLatents& later, const WindowPlan& plan, size_t i);

struct RestoreOptions {
    int64_t window_len = 8;
    int64_t overlap = 4;
    int sample_steps = 8;
    uint64_t seed = 0;
    bool ilt = true;                 // overlap fusion on/off
    bool fuse_at_end = false;        // single fusion pass after sampling
    bool independent_noise = false;  // ablation: no cross-window noise reuse
    bool freenoise_reorder = false;  // alternative scheme: reordered base pool
    Tensor embed;                    // guidance embedding; empty -> zeros
};

// Full pipeline: window the LR clip, run the shared deterministic sampler
// over all windows with per-step overlap fusion, decode with the VAE.
// latent_scale matches the scale the denoiser was trained at.
Tensor restore_video(const Tensor& lr, const denoiser::DenoiserModel& model,
                     const vae::VideoVae& vae, const diffusion::NoiseSchedule& sched,
                     const RestoreOptions& opt, double latent_scale);

}  // namespace latvsr::ilt
