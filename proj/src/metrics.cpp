#include "latvsr/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace latvsr::metrics {

double psnr(const Tensor& a, const Tensor& b, double value_range) {
    if (!a.same_shape(b)) throw std::invalid_argument("psnr: shape mismatch");
    if (a.ndim() != 4) throw std::invalid_argument("psnr: need (T,C,H,W)");
    int64_t T = a.dim(0), frame = a.numel() / T;
    double acc = 0.0;
    for (int64_t t = 0; t < T; ++t) {
        double mse = 0.0;
        const double* pa = a.data() + t * frame;
        const double* pb = b.data() + t * frame;
        for (int64_t i = 0; i < frame; ++i) {
            double d = pa[i] - pb[i];
            mse += d * d;
        }
        mse /= static_cast<double>(frame);
        double v = mse <= 0.0 ? kPsnrCap
                              : std::min(kPsnrCap, 10.0 * std::log10(value_range * value_range / mse));
        acc += v;
    }
    return acc / static_cast<double>(T);
}

namespace {
// Bilinear sample of one channel plane; caller guarantees in-bounds corners.
double bilinear(const double* plane, int64_t H, int64_t W, double y, double x) {
    int64_t y0 = static_cast<int64_t>(std::floor(y));
    int64_t x0 = static_cast<int64_t>(std::floor(x));
    int64_t y1 = std::min(y0 + 1, H - 1), x1 = std::min(x0 + 1, W - 1);
    double fy = y - static_cast<double>(y0), fx = x - static_cast<double>(x0);
    double v00 = plane[y0 * W + x0], v01 = plane[y0 * W + x1];
    double v10 = plane[y1 * W + x0], v11 = plane[y1 * W + x1];
    return v00 * (1 - fy) * (1 - fx) + v01 * (1 - fy) * fx + v10 * fy * (1 - fx) + v11 * fy * fx;
}
}  // namespace

double warp_error(const Tensor& clip, const MotionField& motion) {
    if (clip.ndim() != 4 || motion.ndim() != 4) throw std::invalid_argument("warp_error: need 4-D");
    int64_t T = clip.dim(0), C = clip.dim(1), H = clip.dim(2), W = clip.dim(3);
    if (motion.dim(0) != T - 1 || motion.dim(1) != 2 || motion.dim(2) != H || motion.dim(3) != W)
        throw std::invalid_argument("warp_error: motion geometry mismatch");
    double acc = 0.0;
    int64_t pairs = 0;
    for (int64_t t = 0; t + 1 < T; ++t) {
        const double* dx = motion.data() + ((t * 2 + 0) * H) * W;
        const double* dy = motion.data() + ((t * 2 + 1) * H) * W;
        double sum = 0.0;
        int64_t count = 0;
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x) {
                double sx = static_cast<double>(x) + dx[y * W + x];
                double sy = static_cast<double>(y) + dy[y * W + x];
                if (sx < 0.0 || sy < 0.0 || sx > static_cast<double>(W - 1) ||
                    sy > static_cast<double>(H - 1))
                    continue;
                for (int64_t c = 0; c < C; ++c) {
                    double cur = clip.at4(t, c, y, x);
                    const double* next = clip.data() + ((t + 1) * C + c) * H * W;
                    sum += std::fabs(bilinear(next, H, W, sy, sx) - cur);
                }
                ++count;
            }
        if (count > 0) {
            acc += sum / static_cast<double>(count * C);
            ++pairs;
        }
    }
    if (pairs == 0) return 0.0;
    return (acc / static_cast<double>(pairs)) * 1e3;
}

Tensor temporal_profile(const Tensor& clip, int64_t row) {
    if (clip.ndim() != 4) throw std::invalid_argument("temporal_profile: need (T,C,H,W)");
    int64_t T = clip.dim(0), C = clip.dim(1), H = clip.dim(2), W = clip.dim(3);
    if (row < 0 || row >= H) throw std::invalid_argument("temporal_profile: row out of range");
    Tensor out({T, W});
    for (int64_t t = 0; t < T; ++t)
        for (int64_t x = 0; x < W; ++x) {
            double s = 0.0;
            for (int64_t c = 0; c < C; ++c) s += clip.at4(t, c, row, x);
            out[t * W + x] = s / static_cast<double>(C);
        }
    return out;
}

double flicker_index(const Tensor& clip) {
    if (clip.ndim() != 4) throw std::invalid_argument("flicker_index: need (T,C,H,W)");
    int64_t T = clip.dim(0), H = clip.dim(2), W = clip.dim(3);
    if (T < 2) return 0.0;
    std::vector<int64_t> rows = {H / 4, H / 2, (3 * H) / 4};
    double acc = 0.0;
    int64_t n = 0;
    for (int64_t row : rows) {
        Tensor prof = temporal_profile(clip, row);
        for (int64_t x = 0; x < W; ++x) {
            double mu = 0.0;
            for (int64_t t = 0; t < T; ++t) mu += prof[t * W + x];
            mu /= static_cast<double>(T);
            double var = 0.0;
            for (int64_t t = 0; t < T; ++t) {
                double d = prof[t * W + x] - mu;
                var += d * d;
            }
            acc += var / static_cast<double>(T);
            ++n;
        }
    }
    return acc / static_cast<double>(n);
}

MetricsReport evaluate(const Tensor& output, const Tensor& reference,
                       const std::optional<MotionField>& motion, double value_range) {
    MetricsReport r;
    r.psnr = psnr(output, reference, value_range);
    int64_t T = output.dim(0), frame = output.numel() / T;
    for (int64_t t = 0; t < T; ++t) {
        double mse = 0.0;
        for (int64_t i = 0; i < frame; ++i) {
            double d = output[t * frame + i] - reference[t * frame + i];
            mse += d * d;
        }
        mse /= static_cast<double>(frame);
        r.per_frame_psnr.push_back(
            mse <= 0.0 ? kPsnrCap
                       : std::min(kPsnrCap, 10.0 * std::log10(value_range * value_range / mse)));
    }
    if (motion) r.warp_error = warp_error(output, *motion);
    r.flicker = flicker_index(output);
    return r;
}

}  // namespace latvsr::metrics
