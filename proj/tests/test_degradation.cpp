#include <doctest.h>

#include <cmath>

#include "latvsr/degradation.hpp"
#include "latvsr/metrics.hpp"
#include "latvsr/synth.hpp"

using namespace latvsr;
using namespace latvsr::degradation;

namespace {
Tensor make_hr(int64_t frames, int64_t hw, uint64_t seed) {
    synth::ClipSpec spec;
    spec.frames = frames;
    spec.height = hw;
    spec.width = hw;
    spec.seed = seed;
    return synth::make_clip(spec).hr;
}
}  // namespace

TEST_CASE("replaying a stored recipe reproduces the LR clip bitwise") {
    Tensor hr = make_hr(4, 32, 1);
    for (auto tier : {Tier::BicubicOnly, Tier::Simple, Tier::Complex}) {
        DegradationConfig cfg;
        cfg.tier = tier;
        Rng rng(7);
        auto pair = degrade(hr, cfg, rng);
        Tensor replay = apply_recipe(hr, pair.recipe);
        CHECK(replay.max_abs_diff(pair.lr) == 0.0);
    }
}

TEST_CASE("bicubic-only tier is a pure x4 downscale") {
    Tensor hr = make_hr(8, 64, 2);
    DegradationConfig cfg;
    cfg.tier = Tier::BicubicOnly;
    Rng rng(3);
    auto pair = degrade(hr, cfg, rng);
    REQUIRE(pair.lr.ndim() == 4);
    CHECK(pair.lr.dim(0) == 8);
    CHECK(pair.lr.dim(1) == 3);
    CHECK(pair.lr.dim(2) == 16);
    CHECK(pair.lr.dim(3) == 16);
    REQUIRE(pair.recipe.size() == 1);
    CHECK(pair.recipe[0].at("op") == "resize");
}

TEST_CASE("simple tier with zero blur degenerates to bicubic-only") {
    Tensor hr = make_hr(3, 32, 4);
    DegradationConfig simple;
    simple.tier = Tier::Simple;
    simple.blur_sigma_min = simple.blur_sigma_max = 0.0;
    Rng r1(5);
    auto s = degrade(hr, simple, r1);
    DegradationConfig bicubic;
    bicubic.tier = Tier::BicubicOnly;
    Rng r2(5);
    auto b = degrade(hr, bicubic, r2);
    CHECK(s.lr.max_abs_diff(b.lr) == 0.0);
}

TEST_CASE("tiers degrade progressively harder on average") {
    // Mean PSNR of each tier's LR against the clean bicubic downscale.
    const int n = 16;
    double mean_simple = 0.0, mean_complex = 0.0;
    for (int i = 0; i < n; ++i) {
        Tensor hr = make_hr(3, 32, 100 + static_cast<uint64_t>(i));
        Tensor clean = resize_bicubic(hr, 8, 8);
        DegradationConfig cfg;
        cfg.tier = Tier::Simple;
        Rng r1(static_cast<uint64_t>(i));
        mean_simple += metrics::psnr(degrade(hr, cfg, r1).lr, clean);
        cfg.tier = Tier::Complex;
        Rng r2(static_cast<uint64_t>(i));
        mean_complex += metrics::psnr(degrade(hr, cfg, r2).lr, clean);
    }
    CHECK(mean_complex / n < mean_simple / n);
}

TEST_CASE("block-DCT compression: passthrough at quality 1, lossy below") {
    Tensor hr = make_hr(2, 16, 6);
    CHECK(dct_compress(hr, 1.0).max_abs_diff(hr) == 0.0);
    Tensor low = dct_compress(hr, 0.3);
    CHECK(low.max_abs_diff(hr) > 0.0);
    // heavier quantization hurts more
    CHECK(metrics::psnr(dct_compress(hr, 0.8), hr) > metrics::psnr(low, hr));
    CHECK_THROWS_AS(dct_compress(hr, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(dct_compress(hr, 1.5), std::invalid_argument);
}

TEST_CASE("all frames of one clip share the same sampled parameters") {
    // With a static clip and a noise-free tier, identical input frames must
    // produce identical LR frames; per-frame parameter sampling would break this.
    Tensor hr({4, 3, 32, 32});
    Tensor frame = make_hr(1, 32, 8);
    for (int64_t t = 0; t < 4; ++t)
        for (int64_t i = 0; i < frame.numel(); ++i) hr[t * frame.numel() + i] = frame[i];
    DegradationConfig cfg;
    cfg.tier = Tier::Simple;
    Rng rng(9);
    auto pair = degrade(hr, cfg, rng);
    int64_t n = pair.lr.numel() / 4;
    for (int64_t t = 1; t < 4; ++t)
        for (int64_t i = 0; i < n; ++i) CHECK(pair.lr[t * n + i] == pair.lr[i]);
}

TEST_CASE("config validation and serialization") {
    DegradationConfig cfg;
    CHECK_NOTHROW(cfg.validate());

    DegradationConfig bad = cfg;
    bad.blur_sigma_min = -0.1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.noise_sigma_max = bad.noise_sigma_min - 0.01;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.quality_min = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.scale = 2;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    auto rt = DegradationConfig::from_json(cfg.to_json());
    CHECK(rt.to_json() == cfg.to_json());
    CHECK_THROWS_AS(tier_from_string("medium"), std::invalid_argument);

    // dims not divisible by the scale are refused
    Tensor odd({2, 3, 30, 30});
    Rng rng(1);
    CHECK_THROWS_AS(degrade(odd, cfg, rng), std::invalid_argument);
}

TEST_CASE("gaussian blur conserves a constant image and reduces detail") {
    Tensor flat({1, 1, 16, 16});
    for (int64_t i = 0; i < flat.numel(); ++i) flat[i] = 0.4;
    Tensor b = gaussian_blur(flat, 1.2);
    for (int64_t i = 0; i < b.numel(); ++i) CHECK(b[i] == doctest::Approx(0.4).epsilon(1e-12));

    Tensor hr = make_hr(1, 32, 11);
    CHECK(gaussian_blur(hr, 0.0).max_abs_diff(hr) == 0.0);
    CHECK(metrics::psnr(gaussian_blur(hr, 2.0), hr) < metrics::psnr(gaussian_blur(hr, 0.5), hr));
}
