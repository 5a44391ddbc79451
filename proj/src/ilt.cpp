#include "latvsr/ilt.hpp"

#include <algorithm>
#include <cmath>

namespace latvsr::ilt {

int64_t WindowPlan::overlap_between(size_t i) const {
    if (i + 1 >= windows.size()) throw std::out_of_range("overlap_between: no next window");
    return windows[i].start + window_len - windows[i + 1].start;
}

void WindowPlan::check() const {
    std::vector<int> cover(static_cast<size_t>(total_frames), 0);
    for (const auto& w : windows) {
        if (static_cast<int64_t>(w.frames.size()) != window_len ||
            w.noise.size() != w.frames.size())
            throw std::logic_error("window plan: malformed window");
        for (size_t j = 0; j < w.frames.size(); ++j) {
            int64_t f = w.frames[j];
            if (f < 0 || f >= total_frames) throw std::logic_error("window plan: frame out of range");
            ++cover[static_cast<size_t>(f)];
        }
    }
    for (int64_t f = 0; f < total_frames; ++f)
        if (cover[static_cast<size_t>(f)] < 1 || cover[static_cast<size_t>(f)] > 2)
            throw std::logic_error("window plan: frame " + std::to_string(f) +
                                   " covered " + std::to_string(cover[static_cast<size_t>(f)]) +
                                   " times");
    // noise agreement on overlaps
    for (size_t i = 0; i + 1 < windows.size(); ++i) {
        int64_t L = overlap_between(i);
        if (L < 1) throw std::logic_error("window plan: disjoint consecutive windows");
        for (int64_t j = 0; j < L; ++j)
            if (windows[i].noise[static_cast<size_t>(window_len - L + j)] !=
                windows[i + 1].noise[static_cast<size_t>(j)])
                throw std::logic_error("window plan: noise assignments disagree on overlap");
    }
}

WindowPlan plan_windows(int64_t total_frames, int64_t window_len, int64_t overlap) {
    if (window_len < 2) throw std::invalid_argument("plan_windows: window_len must be >= 2");
    if (overlap < 1 || overlap >= window_len)
        throw std::invalid_argument("plan_windows: need 1 <= overlap < window_len");
    if (total_frames < window_len)
        throw std::invalid_argument("plan_windows: clip shorter than one window");
    WindowPlan plan;
    plan.total_frames = total_frames;
    plan.window_len = window_len;
    plan.overlap = overlap;
    plan.stride = window_len - overlap;

    std::vector<int64_t> starts;
    for (int64_t s = 0; s + window_len < total_frames; s += plan.stride) starts.push_back(s);
    int64_t last = total_frames - window_len;  // right-aligned tail
    if (starts.empty() || starts.back() != last) {
        // Drop regular starts the right-aligned tail makes redundant; otherwise
        // frames near the seam would be covered three times.
        while (starts.size() >= 2 && last < starts[starts.size() - 2] + window_len)
            starts.pop_back();
        starts.push_back(last);
    }

    for (int64_t s : starts) {
        Window w;
        w.start = s;
        for (int64_t j = 0; j < window_len; ++j) {
            w.frames.push_back(s + j);
            w.noise.push_back(s + j);  // per-frame noise identity
        }
        plan.windows.push_back(std::move(w));
    }
    plan.check();
    return plan;
}

const Tensor& NoisePool::get(int64_t i) {
    auto it = pool_.find(i);
    if (it == pool_.end()) {
        Rng r = Rng::child(seed_, static_cast<uint64_t>(i));
        it = pool_.emplace(i, r.normal_tensor(shape_)).first;
    }
    return it->second;
}

std::vector<double> fusion_weights(int64_t overlap) {
    if (overlap < 2) throw std::invalid_argument("fusion_weights: overlap must be >= 2");
    std::vector<double> a(static_cast<size_t>(overlap));
    for (int64_t j = 0; j < overlap; ++j)
        a[static_cast<size_t>(j)] =
            1.0 - static_cast<double>(j) / static_cast<double>(overlap - 1);
    return a;
}

void fuse_overlap(WindowLatents& earlier, WindowLatents& later, const WindowPlan& plan, size_t i) {
    if (earlier.t != later.t)
        throw std::invalid_argument("fuse_overlap: windows at different timesteps");
    int64_t L = plan.overlap_between(i);
    auto alpha = fusion_weights(L);
    int64_t N = plan.window_len;
    int64_t frame = earlier.z.numel() / N;
    for (int64_t j = 0; j < L; ++j) {
        double a = alpha[static_cast<size_t>(j)];
        double* pe = earlier.z.data() + (N - L + j) * frame;
        double* pl = later.z.data() + j * frame;
        for (int64_t k = 0; k < frame; ++k) {
            double fused = a * pe[k] + (1.0 - a) * pl[k];
            pe[k] = fused;
            pl[k] = fused;
        }
    }
}

namespace {
Tensor gather_frames(const Tensor& clip, const std::vector<int64_t>& idx) {
    Tensor out({static_cast<int64_t>(idx.size()), clip.dim(1), clip.dim(2), clip.dim(3)});
    int64_t frame = clip.numel() / clip.dim(0);
    for (size_t j = 0; j < idx.size(); ++j)
        std::copy_n(clip.data() + idx[j] * frame, frame, out.data() + static_cast<int64_t>(j) * frame);
    return out;
}
}  // namespace

Tensor restore_video(const Tensor& lr, const denoiser::DenoiserModel& model,
                     const vae::VideoVae& vae, const diffusion::NoiseSchedule& sched,
                     const RestoreOptions& opt, double latent_scale) {
    if (lr.ndim() != 4) throw std::invalid_argument("restore_video: lr clip must be (T,3,h,w)");
    const int64_t T = lr.dim(0);
    if (T < opt.window_len) throw std::invalid_argument("restore_video: clip shorter than window");
    if (latent_scale <= 0) throw std::invalid_argument("restore_video: latent_scale must be > 0");

    WindowPlan plan = plan_windows(T, opt.window_len, opt.overlap);
    std::vector<int64_t> frame_shape = {model.config().latent_channels, lr.dim(2), lr.dim(3)};
    NoisePool pool(frame_shape, opt.seed);

    // FreeNoise-style alternative: frames past the base pool reuse a seeded
    // reordering of the first window_len noises instead of fresh draws.
    std::vector<int64_t> reorder;
    if (opt.freenoise_reorder) {
        for (int64_t j = 0; j < opt.window_len; ++j) reorder.push_back(j);
        Rng r = Rng::child(opt.seed, 0xf2ee);
        for (int64_t j = opt.window_len - 1; j > 0; --j)
            std::swap(reorder[static_cast<size_t>(j)],
                      reorder[static_cast<size_t>(r.uniform_int(0, j))]);
    }
    auto noise_for = [&](const Window& w, int64_t j, size_t wi) -> const Tensor& {
        if (opt.independent_noise)
            return pool.get(0x10000 + static_cast<int64_t>(wi) * opt.window_len + j);
        int64_t idx = w.noise[static_cast<size_t>(j)];
        if (opt.freenoise_reorder && idx >= opt.window_len)
            idx = reorder[static_cast<size_t>(idx % opt.window_len)];
        return pool.get(idx);
    };

    Tensor embed = opt.embed.numel() ? opt.embed
                                     : nn::timestep_embedding(0, model.config().embed_dim);
    auto ts = diffusion::sampling_timesteps(sched.timesteps, opt.sample_steps);

    std::vector<WindowLatents> lat(plan.windows.size());
    std::vector<diffusion::Conditioning> cond(plan.windows.size());
    for (size_t wi = 0; wi < plan.windows.size(); ++wi) {
        const Window& w = plan.windows[wi];
        Tensor z({opt.window_len, frame_shape[0], frame_shape[1], frame_shape[2]});
        int64_t frame = z.numel() / opt.window_len;
        for (int64_t j = 0; j < opt.window_len; ++j)
            std::copy_n(noise_for(w, j, wi).data(), frame, z.data() + j * frame);
        lat[wi].z = std::move(z);
        lat[wi].t = ts.front();
        cond[wi].lr_latent = gather_frames(lr, w.frames);
        cond[wi].tau = 0;
        cond[wi].embed = embed;
    }

    // Step all windows one transition, then fuse overlaps; repeat. The
    // fusion barrier keeps overlapped frames synchronized step by step.
    for (size_t k = 0; k + 1 < ts.size(); ++k) {
        int t_from = ts[k], t_to = ts[k + 1];
        for (size_t wi = 0; wi < lat.size(); ++wi) {
            Tensor v = model.forward(lat[wi].z, cond[wi], t_from);
            lat[wi].z = diffusion::ddim_step(lat[wi].z, v, t_from, t_to, sched);
            lat[wi].t = t_to;
        }
        if (opt.ilt && !opt.fuse_at_end)
            for (size_t wi = 0; wi + 1 < lat.size(); ++wi)
                fuse_overlap(lat[wi], lat[wi + 1], plan, wi);
    }
    if (opt.ilt && opt.fuse_at_end)
        for (size_t wi = 0; wi + 1 < lat.size(); ++wi) fuse_overlap(lat[wi], lat[wi + 1], plan, wi);

    // Stitch; with fusion the overlap slots already agree, without it the
    // later window simply wins (the seam is the ablation's point).
    Tensor full({T, frame_shape[0], frame_shape[1], frame_shape[2]});
    int64_t frame = full.numel() / T;
    for (size_t wi = 0; wi < plan.windows.size(); ++wi)
        for (int64_t j = 0; j < opt.window_len; ++j)
            std::copy_n(lat[wi].z.data() + j * frame, frame,
                        full.data() + plan.windows[wi].frames[static_cast<size_t>(j)] * frame);

    for (int64_t i = 0; i < full.numel(); ++i) full[i] /= latent_scale;
    return vae.decode(full);
}

}  // namespace latvsr::ilt
