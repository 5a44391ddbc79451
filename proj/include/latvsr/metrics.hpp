#pragma once

#include <optional>
#include <vector>

#include "latvsr/tensor.hpp"

namespace latvsr::metrics {

// Dense ground-truth displacement maps (T-1, 2, H, W): channel 0 is the
// x (column) displacement, channel 1 the y (row) displacement carrying
// pixels of frame t to their position in frame t+1.
using MotionField = Tensor;

struct MetricsReport {
    double psnr = 0.0;
    double warp_error = 0.0;  // x1e-3 scale convention
    double flicker = 0.0;
    std::vector<double> per_frame_psnr;
};

inline constexpr double kPsnrCap = 100.0;

// Per-frame 10*log10(MAX^2/MSE), averaged over frames; identical frames
// score the cap.
double psnr(const Tensor& a, const Tensor& b, double value_range = 1.0);

// Mean absolute difference between frame t+1 and frame t warped forward by
// the ground-truth motion, bilinear sampling, out-of-bounds masked.
// Reported multiplied by 1e3.
double warp_error(const Tensor& clip, const MotionField& motion);

// (T, W) scanline-over-time image for flicker inspection; channel-averaged.
Tensor temporal_profile(const Tensor& clip, int64_t row);

// Scanline intensity variance across time, averaged over a few fixed rows.
// A project-local flicker proxy, not a metric from the literature.
double flicker_index(const Tensor& clip);

MetricsReport evaluate(const Tensor& output, const Tensor& reference,
                       const std::optional<MotionField>& motion, double value_range = 1.0);

}  // namespace latvsr::metrics
