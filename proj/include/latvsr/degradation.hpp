#pragma once

#include <json.hpp>

#include "latvsr/tensor.hpp"

namespace latvsr::degradation {

using json = nlohmann::json;

enum class Tier { BicubicOnly, Simple, Complex };

Tier tier_from_string(const std::string& s);
std::string to_string(Tier t);

struct DegradationConfig {
    Tier tier = Tier::Complex;
    double blur_sigma_min = 0.2, blur_sigma_max = 2.0;
    double noise_sigma_min = 0.01, noise_sigma_max = 0.08;
    double quality_min = 0.3, quality_max = 0.9;  // in (0,1]
    int scale = 4;
    uint64_t seed = 0;

    void validate() const;
    json to_json() const;
    static DegradationConfig from_json(const json& j);
};

// lr = hr degraded by `recipe`; replaying the recipe on hr reproduces lr
// bitwise (noise ops carry their own seeds).
struct DegradedPair {
    Tensor lr;
    Tensor hr;
    json recipe;
};

// Individual degradation operators; clips are (T, C, H, W) in [0,1].
Tensor gaussian_blur(const Tensor& clip, double sigma);
Tensor resize_bicubic(const Tensor& clip, int64_t out_h, int64_t out_w);
Tensor add_gaussian_noise(const Tensor& clip, double sigma, uint64_t seed);
// 8x8 block-DCT coefficient quantization; a codec-free compression proxy.
// quality in (0,1], 1 = lossless passthrough.
Tensor dct_compress(const Tensor& clip, double quality);

Tensor apply_recipe(const Tensor& hr, const json& recipe);

// Samples one degradation recipe per clip (all frames share the sampled
// parameters) and applies it.
DegradedPair degrade(const Tensor& hr, const DegradationConfig& cfg, Rng& rng);

}  // namespace latvsr::degradation
