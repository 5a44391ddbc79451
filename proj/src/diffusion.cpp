#include "latvsr/diffusion.hpp"

#include <cmath>

namespace latvsr::diffusion {

namespace {
// Keeps alpha strictly positive at the last step and sigma strictly
// below 1, per the schedule invariants.
constexpr double kEdge = 1e-3;
}  // namespace

ScheduleKind schedule_kind_from_string(const std::string& s) {
    if (s == "cosine") return ScheduleKind::Cosine;
    if (s == "linear") return ScheduleKind::Linear;
    throw std::invalid_argument("unknown schedule kind: " + s);
}

std::string to_string(ScheduleKind k) {
    return k == ScheduleKind::Cosine ? "cosine" : "linear";
}

NoiseSchedule build_schedule(ScheduleKind kind, int timesteps) {
    if (timesteps < 2) throw std::invalid_argument("build_schedule: timesteps must be >= 2");
    NoiseSchedule s;
    s.timesteps = timesteps;
    s.kind = kind;
    s.alpha.resize(static_cast<size_t>(timesteps));
    s.sigma.resize(static_cast<size_t>(timesteps));
    for (int t = 0; t < timesteps; ++t) {
        double u = static_cast<double>(t) / static_cast<double>(timesteps - 1);
        double a;
        if (kind == ScheduleKind::Cosine) {
            a = std::cos(u * (M_PI / 2.0) * (1.0 - kEdge));
        } else {
            a = std::sqrt(1.0 - u * (1.0 - kEdge * kEdge));
        }
        s.alpha[static_cast<size_t>(t)] = a;
        s.sigma[static_cast<size_t>(t)] = std::sqrt(std::max(0.0, 1.0 - a * a));
    }
    return s;
}

LatentSample forward_noise(const Tensor& z, int t, const Tensor& eps, const NoiseSchedule& sched) {
    sched.check_timestep(t);
    if (!z.same_shape(eps)) throw std::invalid_argument("forward_noise: shape mismatch");
    double a = sched.alpha[static_cast<size_t>(t)], sg = sched.sigma[static_cast<size_t>(t)];
    LatentSample out;
    out.z = Tensor(z.shape());
    for (int64_t i = 0; i < z.numel(); ++i) out.z[i] = a * z[i] + sg * eps[i];
    out.t = t;
    out.epsilon = eps;
    return out;
}

Tensor v_target(const Tensor& z, const Tensor& eps, int t, const NoiseSchedule& sched) {
    sched.check_timestep(t);
    if (!z.same_shape(eps)) throw std::invalid_argument("v_target: shape mismatch");
    double a = sched.alpha[static_cast<size_t>(t)], sg = sched.sigma[static_cast<size_t>(t)];
    Tensor v(z.shape());
    for (int64_t i = 0; i < z.numel(); ++i) v[i] = a * eps[i] - sg * z[i];
    return v;
}

std::pair<Tensor, Tensor> invert_v(const Tensor& z_t, const Tensor& v, int t,
                                   const NoiseSchedule& sched) {
    sched.check_timestep(t);
    if (!z_t.same_shape(v)) throw std::invalid_argument("invert_v: shape mismatch");
    double a = sched.alpha[static_cast<size_t>(t)], sg = sched.sigma[static_cast<size_t>(t)];
    Tensor z(z_t.shape()), eps(z_t.shape());
    for (int64_t i = 0; i < z_t.numel(); ++i) {
        z[i] = a * z_t[i] - sg * v[i];
        eps[i] = sg * z_t[i] + a * v[i];
    }
    return {std::move(z), std::move(eps)};
}

double diffusion_loss(const Tensor& pred_v, const Tensor& z, const Tensor& eps, int t,
                      const NoiseSchedule& sched) {
    if (!pred_v.same_shape(z) || !z.same_shape(eps))
        throw std::invalid_argument("diffusion_loss: shape mismatch");
    if (!pred_v.all_finite() || !z.all_finite() || !eps.all_finite())
        throw std::domain_error("diffusion_loss: non-finite input");
    Tensor target = v_target(z, eps, t, sched);
    double s = 0.0;
    for (int64_t i = 0; i < target.numel(); ++i) {
        double d = pred_v[i] - target[i];
        s += d * d;
    }
    return s / static_cast<double>(target.numel());
}

ag::Var diffusion_loss_ag(const ag::Var& pred_v, const Tensor& z, const Tensor& eps, int t,
                          const NoiseSchedule& sched) {
    return ag::mse(pred_v, ag::constant(v_target(z, eps, t, sched)));
}

std::vector<int> sampling_timesteps(int timesteps, int steps) {
    if (steps < 1 || steps > timesteps)
        throw std::invalid_argument("sampling_timesteps: need 1 <= steps <= timesteps");
    std::vector<int> ts;
    ts.reserve(static_cast<size_t>(steps) + 1);
    for (int k = 0; k <= steps; ++k) {
        double u = 1.0 - static_cast<double>(k) / static_cast<double>(steps);
        int t = static_cast<int>(std::lround(u * (timesteps - 1)));
        if (ts.empty() || ts.back() != t) ts.push_back(t);
    }
    return ts;
}

Tensor ddim_step(const Tensor& z_t, const Tensor& pred_v, int t_from, int t_to,
                 const NoiseSchedule& sched) {
    sched.check_timestep(t_from);
    sched.check_timestep(t_to);
    if (!z_t.same_shape(pred_v)) throw std::invalid_argument("ddim_step: shape mismatch");
    double af = sched.alpha[static_cast<size_t>(t_from)], sf = sched.sigma[static_cast<size_t>(t_from)];
    double at = sched.alpha[static_cast<size_t>(t_to)], st = sched.sigma[static_cast<size_t>(t_to)];
    Tensor out(z_t.shape());
    for (int64_t i = 0; i < z_t.numel(); ++i) {
        double z0 = af * z_t[i] - sf * pred_v[i];
        double eps = sf * z_t[i] + af * pred_v[i];
        out[i] = at * z0 + st * eps;
    }
    return out;
}

Tensor sample(const DenoiseFn& denoiser, const Tensor& init_noise, const NoiseSchedule& sched,
              int steps) {
    std::vector<int> ts = sampling_timesteps(sched.timesteps, steps);
    Tensor z = init_noise;
    for (size_t i = 0; i + 1 < ts.size(); ++i) {
        Tensor v = denoiser(z, ts[i]);
        if (!v.same_shape(z)) throw std::invalid_argument("sample: denoiser output shape mismatch");
        z = ddim_step(z, v, ts[i], ts[i + 1], sched);
    }
    return z;
}

}  // namespace latvsr::diffusion
