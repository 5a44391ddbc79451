#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "latvsr/autograd.hpp"
#include "latvsr/tensor.hpp"

namespace latvsr::diffusion {

enum class ScheduleKind { Cosine, Linear };

ScheduleKind schedule_kind_from_string(const std::string& s);
std::string to_string(ScheduleKind k);

// Variance-preserving schedule: alpha[t]^2 + sigma[t]^2 = 1, alpha
// non-increasing from 1, sigma non-decreasing from 0.
struct NoiseSchedule {
    int timesteps = 0;
    std::vector<double> alpha;
    std::vector<double> sigma;
    ScheduleKind kind = ScheduleKind::Cosine;

    void check_timestep(int t) const {
        if (t < 0 || t >= timesteps) throw std::invalid_argument("timestep out of range");
    }
};

struct LatentSample {
    Tensor z;  // (T, C_z, h, w) at timestep t
    int t = 0;
    std::optional<Tensor> epsilon;
};

// Conditioning bundle: a noise-perturbed low-resolution clip plus a generic
// embedding vector standing in for text / noise-level conditioning.
struct Conditioning {
    Tensor lr_latent;  // x_tau, same spatial geometry as the latent
    int tau = 0;
    Tensor embed;
};

NoiseSchedule build_schedule(ScheduleKind kind, int timesteps);

// z_t = alpha_t z + sigma_t eps
LatentSample forward_noise(const Tensor& z, int t, const Tensor& eps, const NoiseSchedule& sched);

// v = alpha_t eps - sigma_t z
Tensor v_target(const Tensor& z, const Tensor& eps, int t, const NoiseSchedule& sched);

// Inversion of the v parameterization: z = alpha_t z_t - sigma_t v,
// eps = sigma_t z_t + alpha_t v.
std::pair<Tensor, Tensor> invert_v(const Tensor& z_t, const Tensor& v, int t,
                                   const NoiseSchedule& sched);

double diffusion_loss(const Tensor& pred_v, const Tensor& z, const Tensor& eps, int t,
                      const NoiseSchedule& sched);
// Graph-building variant for training; target is held constant.
ag::Var diffusion_loss_ag(const ag::Var& pred_v, const Tensor& z, const Tensor& eps, int t,
                          const NoiseSchedule& sched);

// The denoiser seen by the sampler: (z_t, t) -> predicted v.
using DenoiseFn = std::function<Tensor(const Tensor& z_t, int t)>;

// Deterministic timestep subsequence from timesteps-1 down to 0, with
// `steps` transitions.
std::vector<int> sampling_timesteps(int timesteps, int steps);

// One deterministic v-parameterization update from t_from to t_to.
Tensor ddim_step(const Tensor& z_t, const Tensor& pred_v, int t_from, int t_to,
                 const NoiseSchedule& sched);

// Full sampling loop. init_noise is the latent at t = timesteps-1; the
// conditioning is owned by the denoiser closure. Deterministic given its
// inputs.
Tensor sample(const DenoiseFn& denoiser, const Tensor& init_noise, const NoiseSchedule& sched,
              int steps);

}  // namespace latvsr::diffusion
