#include <doctest.h>

#include <cmath>

#include "latvsr/metrics.hpp"
#include "latvsr/synth.hpp"

using namespace latvsr;

namespace {
Tensor noise_clip(int64_t T, int64_t H, int64_t W, double sigma, uint64_t seed) {
    Rng rng(seed);
    Tensor clip({T, 3, H, W});
    for (int64_t i = 0; i < clip.numel(); ++i) clip[i] = 0.5 + sigma * rng.normal();
    return clip;
}
}  // namespace

TEST_CASE("psnr: cap on identity, exact 20 dB constant offset, scalar oracle, symmetry") {
    Rng rng(1);
    Tensor a = noise_clip(3, 8, 8, 0.1, 1);
    CHECK(metrics::psnr(a, a) == metrics::kPsnrCap);

    Tensor b = a;
    for (int64_t i = 0; i < b.numel(); ++i) b[i] += 0.1;
    CHECK(metrics::psnr(a, b) == doctest::Approx(20.0).epsilon(1e-12));

    Tensor c = noise_clip(3, 8, 8, 0.1, 2);
    // two-pass per-frame oracle
    double acc = 0.0;
    for (int64_t t = 0; t < a.dim(0); ++t) {
        double mse = 0.0;
        int64_t n = a.numel() / a.dim(0);
        for (int64_t i = 0; i < n; ++i) {
            double d = a[t * n + i] - c[t * n + i];
            mse += d * d;
        }
        mse /= static_cast<double>(n);
        acc += 10.0 * std::log10(1.0 / mse);
    }
    acc /= static_cast<double>(a.dim(0));
    CHECK(metrics::psnr(a, c) == doctest::Approx(acc).epsilon(1e-6));
    CHECK(metrics::psnr(a, c) == doctest::Approx(metrics::psnr(c, a)).epsilon(1e-12));

    Tensor wrong({3, 3, 8, 9});
    CHECK_THROWS_AS(metrics::psnr(a, wrong), std::invalid_argument);
}

TEST_CASE("warp_error zero laws: static clip and exact integer translation") {
    // static clip, zero motion
    Tensor clip({4, 3, 8, 8});
    Rng rng(3);
    Tensor frame = rng.normal_tensor({3, 8, 8});
    for (int64_t t = 0; t < 4; ++t)
        for (int64_t i = 0; i < frame.numel(); ++i) clip[t * frame.numel() + i] = frame[i];
    Tensor zero_motion = Tensor::zeros({3, 2, 8, 8});
    CHECK(metrics::warp_error(clip, zero_motion) == 0.0);

    // integer translation of a procedural texture with its exact field
    synth::ClipSpec spec;
    spec.frames = 6;
    spec.height = 32;
    spec.width = 32;
    spec.motion = synth::Motion::Translate;
    spec.velocity = std::make_pair(1.0, 0.0);
    spec.seed = 9;
    auto sc = synth::make_clip(spec);
    CHECK(metrics::warp_error(sc.hr, sc.motion_field) < 1e-6);
}

TEST_CASE("warp_error oracle on a tiny hand-computed case") {
    // two 1x1-channel 2x2 frames, motion (dx=1, dy=0) at every pixel:
    // frame0 at (y,x) should match frame1 at (y, x+1); x=1 falls outside
    // and is masked, so only x=0 contributes.
    Tensor clip({2, 1, 2, 2});
    // frame 0: [[1,2],[3,4]]  frame 1: [[5,1],[7,3]]
    double f0[4] = {1, 2, 3, 4}, f1[4] = {5, 1, 7, 3};
    for (int i = 0; i < 4; ++i) {
        clip[i] = f0[i];
        clip[4 + i] = f1[i];
    }
    Tensor motion({1, 2, 2, 2});
    for (int64_t i = 0; i < 4; ++i) motion[i] = 1.0;  // dx channel
    // frame0(y,0) vs frame1(y,1): |1-1| and |3-3| -> 0
    CHECK(metrics::warp_error(clip, motion) == doctest::Approx(0.0));
    clip[4 + 1] = 1.5;  // frame1(0,1) now differs by 0.5
    // masked mean over 2 valid pixels = 0.25, reported x1e3
    CHECK(metrics::warp_error(clip, motion) == doctest::Approx(250.0).epsilon(1e-9));
}

TEST_CASE("warp_error grows with independent per-frame noise and with noise sigma") {
    synth::ClipSpec spec;
    spec.frames = 6;
    spec.height = 32;
    spec.width = 32;
    spec.motion = synth::Motion::Translate;
    spec.velocity = std::make_pair(1.0, 0.0);
    spec.seed = 21;
    auto sc = synth::make_clip(spec);

    double prev = metrics::warp_error(sc.hr, sc.motion_field);
    Rng rng(5);
    for (double sigma : {0.01, 0.03, 0.09}) {
        Tensor noisy = sc.hr;
        for (int64_t i = 0; i < noisy.numel(); ++i) noisy[i] += sigma * rng.normal();
        double we = metrics::warp_error(noisy, sc.motion_field);
        CHECK(we > prev);
        prev = we;
    }
}

TEST_CASE("temporal profile shape and kinematics") {
    Tensor clip({4, 3, 8, 6});
    Rng rng(2);
    Tensor frame = rng.normal_tensor({3, 8, 6});
    for (int64_t t = 0; t < 4; ++t)
        for (int64_t i = 0; i < frame.numel(); ++i) clip[t * frame.numel() + i] = frame[i];
    Tensor prof = metrics::temporal_profile(clip, 4);
    REQUIRE(prof.ndim() == 2);
    CHECK(prof.dim(0) == 4);
    CHECK(prof.dim(1) == 6);
    // static clip: all rows of the profile identical
    for (int64_t t = 1; t < 4; ++t)
        for (int64_t x = 0; x < 6; ++x) CHECK(prof[t * 6 + x] == doctest::Approx(prof[x]));
    CHECK_THROWS_AS(metrics::temporal_profile(clip, 8), std::invalid_argument);

    // static clip has zero flicker; per-frame noise does not
    CHECK(metrics::flicker_index(clip) == doctest::Approx(0.0));
    CHECK(metrics::flicker_index(noise_clip(4, 8, 8, 0.2, 7)) > 0.0);
}

TEST_CASE("evaluate bundles psnr, warp error, and per-frame values") {
    synth::ClipSpec spec;
    spec.frames = 5;
    spec.height = 16;
    spec.width = 16;
    spec.seed = 4;
    auto sc = synth::make_clip(spec);
    auto rep = metrics::evaluate(sc.hr, sc.hr, sc.motion_field);
    CHECK(rep.psnr == metrics::kPsnrCap);
    CHECK(rep.per_frame_psnr.size() == 5);
    CHECK(std::isfinite(rep.warp_error));
}
