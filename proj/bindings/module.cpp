// Python bindings for the numerical core: schedule math, window planning,
// fusion weights, metrics, degradation, and synthetic clip generation.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "latvsr/degradation.hpp"
#include "latvsr/diffusion.hpp"
#include "latvsr/ilt.hpp"
#include "latvsr/metrics.hpp"
#include "latvsr/synth.hpp"

namespace py = pybind11;
using namespace latvsr;

namespace {

Tensor from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    std::vector<int64_t> shape(a.ndim());
    for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[static_cast<size_t>(i)] = a.shape(i);
    std::vector<double> data(a.data(), a.data() + a.size());
    return Tensor(std::move(shape), std::move(data));
}

py::array_t<double> to_numpy(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> a(shape);
    std::copy(t.data(), t.data() + t.numel(), a.mutable_data());
    return a;
}

diffusion::NoiseSchedule schedule_from(const std::string& kind, int timesteps) {
    return diffusion::build_schedule(diffusion::schedule_kind_from_string(kind), timesteps);
}

}  // namespace

PYBIND11_MODULE(_latvsr, m) {
    m.doc() = "latent video super-resolution core operations";
    using NpArr = py::array_t<double, py::array::c_style | py::array::forcecast>;

    // ---- diffusion math ----
    m.def(
        "build_schedule",
        [](const std::string& kind, int timesteps) {
            auto s = schedule_from(kind, timesteps);
            return py::make_tuple(s.alpha, s.sigma);
        },
        py::arg("kind"), py::arg("timesteps"),
        "Variance-preserving (alpha, sigma) arrays for 'cosine' or 'linear'.");
    m.def(
        "forward_noise",
        [](NpArr z, int t, NpArr eps, const std::string& kind, int timesteps) {
            auto s = schedule_from(kind, timesteps);
            return to_numpy(diffusion::forward_noise(from_numpy(z), t, from_numpy(eps), s).z);
        },
        py::arg("z"), py::arg("t"), py::arg("eps"), py::arg("kind") = "cosine",
        py::arg("timesteps") = 50);
    m.def(
        "v_target",
        [](NpArr z, NpArr eps, int t, const std::string& kind, int timesteps) {
            auto s = schedule_from(kind, timesteps);
            return to_numpy(diffusion::v_target(from_numpy(z), from_numpy(eps), t, s));
        },
        py::arg("z"), py::arg("eps"), py::arg("t"), py::arg("kind") = "cosine",
        py::arg("timesteps") = 50);
    m.def(
        "invert_v",
        [](NpArr z_t, NpArr v, int t, const std::string& kind, int timesteps) {
            auto s = schedule_from(kind, timesteps);
            auto [z, eps] = diffusion::invert_v(from_numpy(z_t), from_numpy(v), t, s);
            return py::make_tuple(to_numpy(z), to_numpy(eps));
        },
        py::arg("z_t"), py::arg("v"), py::arg("t"), py::arg("kind") = "cosine",
        py::arg("timesteps") = 50);
    m.def(
        "diffusion_loss",
        [](NpArr pred_v, NpArr z, NpArr eps, int t, const std::string& kind, int timesteps) {
            auto s = schedule_from(kind, timesteps);
            return diffusion::diffusion_loss(from_numpy(pred_v), from_numpy(z), from_numpy(eps),
                                             t, s);
        },
        py::arg("pred_v"), py::arg("z"), py::arg("eps"), py::arg("t"), py::arg("kind") = "cosine",
        py::arg("timesteps") = 50);
    m.def("sampling_timesteps", &diffusion::sampling_timesteps, py::arg("timesteps"),
          py::arg("steps"));
    m.def(
        "ddim_step",
        [](NpArr z_t, NpArr v, int t_from, int t_to, const std::string& kind, int timesteps) {
            auto s = schedule_from(kind, timesteps);
            return to_numpy(diffusion::ddim_step(from_numpy(z_t), from_numpy(v), t_from, t_to, s));
        },
        py::arg("z_t"), py::arg("pred_v"), py::arg("t_from"), py::arg("t_to"),
        py::arg("kind") = "cosine", py::arg("timesteps") = 50);

    // ---- window planning / fusion ----
    m.def("fusion_weights", &ilt::fusion_weights, py::arg("overlap"));
    m.def(
        "plan_windows",
        [](int64_t total_frames, int64_t window_len, int64_t overlap) {
            auto p = ilt::plan_windows(total_frames, window_len, overlap);
            py::list windows;
            for (const auto& w : p.windows)
                windows.append(py::dict(py::arg("start") = w.start, py::arg("frames") = w.frames,
                                        py::arg("noise") = w.noise));
            return py::dict(py::arg("total_frames") = p.total_frames,
                            py::arg("window_len") = p.window_len, py::arg("stride") = p.stride,
                            py::arg("overlap") = p.overlap, py::arg("windows") = windows);
        },
        py::arg("total_frames"), py::arg("window_len"), py::arg("overlap"));

    // ---- metrics ----
    m.def(
        "psnr", [](NpArr a, NpArr b, double range) {
            return metrics::psnr(from_numpy(a), from_numpy(b), range);
        },
        py::arg("a"), py::arg("b"), py::arg("value_range") = 1.0);
    m.def(
        "warp_error",
        [](NpArr clip, NpArr motion) {
            return metrics::warp_error(from_numpy(clip), from_numpy(motion));
        },
        py::arg("clip"), py::arg("motion"));
    m.def(
        "flicker_index", [](NpArr clip) { return metrics::flicker_index(from_numpy(clip)); },
        py::arg("clip"));

    // ---- data synthesis / degradation ----
    m.def(
        "make_clip",
        [](int64_t frames, int64_t height, int64_t width, const std::string& motion,
           bool high_quality, uint64_t seed) {
            synth::ClipSpec spec;
            spec.frames = frames;
            spec.height = height;
            spec.width = width;
            spec.motion = synth::motion_from_string(motion);
            spec.high_quality = high_quality;
            spec.seed = seed;
            auto c = synth::make_clip(spec);
            return py::make_tuple(to_numpy(c.hr), to_numpy(c.motion_field));
        },
        py::arg("frames") = 32, py::arg("height") = 64, py::arg("width") = 64,
        py::arg("motion") = "mixed", py::arg("high_quality") = false, py::arg("seed") = 0);
    m.def(
        "degrade",
        [](NpArr hr, const std::string& tier, uint64_t seed) {
            degradation::DegradationConfig cfg;
            cfg.tier = degradation::tier_from_string(tier);
            Rng rng(seed);
            auto pair = degradation::degrade(from_numpy(hr), cfg, rng);
            return py::make_tuple(to_numpy(pair.lr), pair.recipe.dump());
        },
        py::arg("hr"), py::arg("tier") = "complex", py::arg("seed") = 0,
        "Returns (lr, recipe_json); replaying the recipe reproduces lr bitwise.");
    m.def(
        "apply_recipe",
        [](NpArr hr, const std::string& recipe_json) {
            return to_numpy(
                degradation::apply_recipe(from_numpy(hr), nlohmann::json::parse(recipe_json)));
        },
        py::arg("hr"), py::arg("recipe_json"));
}
