#include "latvsr/degradation.hpp"

#include <algorithm>
#include <cmath>

namespace latvsr::degradation {

Tier tier_from_string(const std::string& s) {
    if (s == "bicubic_only") return Tier::BicubicOnly;
    if (s == "simple") return Tier::Simple;
    if (s == "complex") return Tier::Complex;
    throw std::invalid_argument("unknown degradation tier: " + s);
}

std::string to_string(Tier t) {
    switch (t) {
        case Tier::BicubicOnly: return "bicubic_only";
        case Tier::Simple: return "simple";
        case Tier::Complex: return "complex";
    }
    throw std::logic_error("bad tier");
}

void DegradationConfig::validate() const {
    if (blur_sigma_min < 0 || blur_sigma_max < blur_sigma_min)
        throw std::invalid_argument("degradation config: bad blur sigma range");
    if (noise_sigma_min < 0 || noise_sigma_max < noise_sigma_min)
        throw std::invalid_argument("degradation config: bad noise sigma range");
    if (quality_min <= 0 || quality_min > 1 || quality_max < quality_min || quality_max > 1)
        throw std::invalid_argument("degradation config: quality range must sit in (0,1]");
    if (scale != 4) throw std::invalid_argument("degradation config: scale must be 4");
}

json DegradationConfig::to_json() const {
    return json{{"tier", to_string(tier)},
                {"blur_sigma_range", {blur_sigma_min, blur_sigma_max}},
                {"noise_sigma_range", {noise_sigma_min, noise_sigma_max}},
                {"compression_quality_range", {quality_min, quality_max}},
                {"scale", scale},
                {"seed", seed}};
}

DegradationConfig DegradationConfig::from_json(const json& j) {
    DegradationConfig c;
    c.tier = tier_from_string(j.at("tier").get<std::string>());
    if (j.contains("blur_sigma_range")) {
        c.blur_sigma_min = j["blur_sigma_range"][0];
        c.blur_sigma_max = j["blur_sigma_range"][1];
    }
    if (j.contains("noise_sigma_range")) {
        c.noise_sigma_min = j["noise_sigma_range"][0];
        c.noise_sigma_max = j["noise_sigma_range"][1];
    }
    if (j.contains("compression_quality_range")) {
        c.quality_min = j["compression_quality_range"][0];
        c.quality_max = j["compression_quality_range"][1];
    }
    c.scale = j.value("scale", 4);
    c.seed = j.value("seed", 0ull);
    c.validate();
    return c;
}

Tensor gaussian_blur(const Tensor& clip, double sigma) {
    if (clip.ndim() != 4) throw std::invalid_argument("gaussian_blur: need (T,C,H,W)");
    if (sigma <= 0.0) return clip;
    int64_t radius = std::max<int64_t>(1, static_cast<int64_t>(std::ceil(3.0 * sigma)));
    std::vector<double> k(static_cast<size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int64_t i = -radius; i <= radius; ++i) {
        double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
        k[static_cast<size_t>(i + radius)] = v;
        sum += v;
    }
    for (double& v : k) v /= sum;

    int64_t T = clip.dim(0), C = clip.dim(1), H = clip.dim(2), W = clip.dim(3);
    Tensor tmp(clip.shape()), out(clip.shape());
    auto reflect = [](int64_t i, int64_t n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
        return std::clamp<int64_t>(i, 0, n - 1);
    };
    // horizontal
    for (int64_t tc = 0; tc < T * C; ++tc) {
        const double* src = clip.data() + tc * H * W;
        double* dst = tmp.data() + tc * H * W;
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x) {
                double acc = 0.0;
                for (int64_t i = -radius; i <= radius; ++i)
                    acc += k[static_cast<size_t>(i + radius)] * src[y * W + reflect(x + i, W)];
                dst[y * W + x] = acc;
            }
    }
    // vertical
    for (int64_t tc = 0; tc < T * C; ++tc) {
        const double* src = tmp.data() + tc * H * W;
        double* dst = out.data() + tc * H * W;
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x) {
                double acc = 0.0;
                for (int64_t i = -radius; i <= radius; ++i)
                    acc += k[static_cast<size_t>(i + radius)] * src[reflect(y + i, H) * W + x];
                dst[y * W + x] = acc;
            }
    }
    return out;
}

namespace {

// Keys cubic kernel, a = -0.5.
double cubic(double x) {
    x = std::fabs(x);
    if (x < 1.0) return 1.5 * x * x * x - 2.5 * x * x + 1.0;
    if (x < 2.0) return -0.5 * x * x * x + 2.5 * x * x - 4.0 * x + 2.0;
    return 0.0;
}

// Per-axis resample plan with kernel widening for downscale (imresize
// convention), edge-clamped indices, weights normalized per output sample.
struct ResamplePlan {
    std::vector<std::vector<std::pair<int64_t, double>>> taps;
};

ResamplePlan plan_axis(int64_t in, int64_t out) {
    ResamplePlan p;
    p.taps.resize(static_cast<size_t>(out));
    double scale = static_cast<double>(out) / static_cast<double>(in);
    double kscale = std::min(scale, 1.0);
    double support = 2.0 / kscale;
    for (int64_t i = 0; i < out; ++i) {
        double u = (static_cast<double>(i) + 0.5) / scale - 0.5;
        int64_t lo = static_cast<int64_t>(std::floor(u - support)) + 1;
        int64_t hi = static_cast<int64_t>(std::floor(u + support));
        double wsum = 0.0;
        auto& taps = p.taps[static_cast<size_t>(i)];
        for (int64_t j = lo; j <= hi; ++j) {
            double w = cubic((u - static_cast<double>(j)) * kscale) * kscale;
            if (w == 0.0) continue;
            taps.emplace_back(std::clamp<int64_t>(j, 0, in - 1), w);
            wsum += w;
        }
        for (auto& [idx, w] : taps) w /= wsum;
    }
    return p;
}

}  // namespace

Tensor resize_bicubic(const Tensor& clip, int64_t out_h, int64_t out_w) {
    if (clip.ndim() != 4) throw std::invalid_argument("resize_bicubic: need (T,C,H,W)");
    int64_t T = clip.dim(0), C = clip.dim(1), H = clip.dim(2), W = clip.dim(3);
    ResamplePlan ph = plan_axis(H, out_h), pw = plan_axis(W, out_w);
    Tensor tmp({T, C, H, out_w});
    for (int64_t tc = 0; tc < T * C; ++tc) {
        const double* src = clip.data() + tc * H * W;
        double* dst = tmp.data() + tc * H * out_w;
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < out_w; ++x) {
                double acc = 0.0;
                for (const auto& [j, w] : pw.taps[static_cast<size_t>(x)]) acc += w * src[y * W + j];
                dst[y * out_w + x] = acc;
            }
    }
    Tensor out({T, C, out_h, out_w});
    for (int64_t tc = 0; tc < T * C; ++tc) {
        const double* src = tmp.data() + tc * H * out_w;
        double* dst = out.data() + tc * out_h * out_w;
        for (int64_t y = 0; y < out_h; ++y)
            for (int64_t x = 0; x < out_w; ++x) {
                double acc = 0.0;
                for (const auto& [j, w] : ph.taps[static_cast<size_t>(y)]) acc += w * src[j * out_w + x];
                dst[y * out_w + x] = acc;
            }
    }
    return out;
}

Tensor add_gaussian_noise(const Tensor& clip, double sigma, uint64_t seed) {
    Rng rng(seed);
    Tensor out(clip.shape());
    for (int64_t i = 0; i < clip.numel(); ++i) out[i] = clip[i] + sigma * rng.normal();
    return out;
}

namespace {

void dct8(const double in[8], double out[8]) {
    for (int k = 0; k < 8; ++k) {
        double s = 0.0;
        for (int n = 0; n < 8; ++n) s += in[n] * std::cos(M_PI / 8.0 * (n + 0.5) * k);
        out[k] = s * (k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0));
    }
}

void idct8(const double in[8], double out[8]) {
    for (int n = 0; n < 8; ++n) {
        double s = in[0] * std::sqrt(1.0 / 8.0);
        for (int k = 1; k < 8; ++k)
            s += in[k] * std::sqrt(2.0 / 8.0) * std::cos(M_PI / 8.0 * (n + 0.5) * k);
        out[n] = s;
    }
}

}  // namespace

Tensor dct_compress(const Tensor& clip, double quality) {
    if (clip.ndim() != 4) throw std::invalid_argument("dct_compress: need (T,C,H,W)");
    if (quality <= 0.0 || quality > 1.0) throw std::invalid_argument("dct_compress: quality in (0,1]");
    if (quality >= 1.0) return clip;
    int64_t T = clip.dim(0), C = clip.dim(1), H = clip.dim(2), W = clip.dim(3);
    Tensor out = clip;
    double severity = 1.0 - quality;
    for (int64_t tc = 0; tc < T * C; ++tc) {
        double* plane = out.data() + tc * H * W;
        for (int64_t by = 0; by < H; by += 8)
            for (int64_t bx = 0; bx < W; bx += 8) {
                double block[8][8], tmp[8][8];
                for (int64_t y = 0; y < 8; ++y)
                    for (int64_t x = 0; x < 8; ++x) {
                        int64_t sy = std::min(by + y, H - 1), sx = std::min(bx + x, W - 1);
                        block[y][x] = plane[sy * W + sx];
                    }
                // separable 2-D DCT
                for (int y = 0; y < 8; ++y) dct8(block[y], tmp[y]);
                for (int x = 0; x < 8; ++x) {
                    double col[8], colo[8];
                    for (int y = 0; y < 8; ++y) col[y] = tmp[y][x];
                    dct8(col, colo);
                    for (int y = 0; y < 8; ++y) block[y][x] = colo[y];
                }
                // frequency-weighted quantization
                for (int y = 0; y < 8; ++y)
                    for (int x = 0; x < 8; ++x) {
                        double step = severity * 0.06 * (1.0 + static_cast<double>(y + x));
                        if (step > 0.0) block[y][x] = std::round(block[y][x] / step) * step;
                    }
                for (int x = 0; x < 8; ++x) {
                    double col[8], colo[8];
                    for (int y = 0; y < 8; ++y) col[y] = block[y][x];
                    idct8(col, colo);
                    for (int y = 0; y < 8; ++y) tmp[y][x] = colo[y];
                }
                for (int y = 0; y < 8; ++y) {
                    double row[8];
                    idct8(tmp[y], row);
                    for (int64_t x = 0; x < 8; ++x)
                        if (by + y < H && bx + x < W) plane[(by + y) * W + bx + x] = row[x];
                }
            }
    }
    return out;
}

Tensor apply_recipe(const Tensor& hr, const json& recipe) {
    Tensor cur = hr;
    for (const auto& step : recipe) {
        std::string op = step.at("op").get<std::string>();
        if (op == "blur") {
            cur = gaussian_blur(cur, step.at("sigma").get<double>());
        } else if (op == "resize") {
            cur = resize_bicubic(cur, step.at("h").get<int64_t>(), step.at("w").get<int64_t>());
        } else if (op == "noise") {
            cur = add_gaussian_noise(cur, step.at("sigma").get<double>(),
                                     step.at("seed").get<uint64_t>());
        } else if (op == "compress") {
            cur = dct_compress(cur, step.at("quality").get<double>());
        } else {
            throw std::invalid_argument("apply_recipe: unknown op " + op);
        }
    }
    return cur;
}

DegradedPair degrade(const Tensor& hr, const DegradationConfig& cfg, Rng& rng) {
    cfg.validate();
    if (hr.ndim() != 4) throw std::invalid_argument("degrade: need (T,C,H,W)");
    int64_t H = hr.dim(2), W = hr.dim(3);
    if (H % cfg.scale != 0 || W % cfg.scale != 0)
        throw std::invalid_argument("degrade: dims not divisible by scale");
    auto uniform_in = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };

    json recipe = json::array();
    json resize_op = {{"op", "resize"}, {"h", H / cfg.scale}, {"w", W / cfg.scale}};
    switch (cfg.tier) {
        case Tier::BicubicOnly:
            recipe.push_back(resize_op);
            break;
        case Tier::Simple: {
            recipe.push_back({{"op", "blur"},
                              {"sigma", uniform_in(cfg.blur_sigma_min, cfg.blur_sigma_max)}});
            recipe.push_back(resize_op);
            break;
        }
        case Tier::Complex: {
            std::vector<json> ops;
            ops.push_back({{"op", "blur"},
                           {"sigma", uniform_in(cfg.blur_sigma_min, cfg.blur_sigma_max)}});
            ops.push_back({{"op", "noise"},
                           {"sigma", uniform_in(cfg.noise_sigma_min, cfg.noise_sigma_max)},
                           {"seed", rng.next_u64()}});
            ops.push_back({{"op", "compress"},
                           {"quality", uniform_in(cfg.quality_min, cfg.quality_max)}});
            // Fisher-Yates over the non-resize ops, then the single resize
            // inserted at a random position.
            for (size_t i = ops.size(); i > 1; --i)
                std::swap(ops[i - 1], ops[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1))]);
            size_t rpos = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(ops.size())));
            for (size_t i = 0; i < ops.size(); ++i) {
                if (i == rpos) recipe.push_back(resize_op);
                recipe.push_back(ops[i]);
            }
            if (rpos == ops.size()) recipe.push_back(resize_op);
            break;
        }
    }
    DegradedPair pair;
    pair.hr = hr;
    pair.recipe = recipe;
    pair.lr = apply_recipe(hr, recipe);
    return pair;
}

}  // namespace latvsr::degradation
