#pragma once

#include <optional>
#include <utility>

#include <json.hpp>

#include "latvsr/tensor.hpp"

namespace latvsr::synth {

using json = nlohmann::json;

enum class Motion { Translate, Rotate, Zoom, Mixed };

Motion motion_from_string(const std::string& s);
std::string to_string(Motion m);

struct ClipSpec {
    int64_t frames = 32;
    int64_t height = 64;
    int64_t width = 64;
    Motion motion = Motion::Mixed;
    // High-quality tier: richer texture spectrum; callers typically also
    // double the resolution.
    bool high_quality = false;
    uint64_t seed = 0;
    // Fixes the translation velocity (px/frame) instead of sampling it;
    // only meaningful for Motion::Translate.
    std::optional<std::pair<double, double>> velocity;
};

// Procedurally textured clip with analytically known dense motion.
// hr is (T,3,H,W) in [0,1]; motion_field is (T-1,2,H,W) with channel 0 the
// x displacement and channel 1 the y displacement from frame t to t+1.
struct SynthClip {
    Tensor hr;
    Tensor motion_field;
    json meta;
};

SynthClip make_clip(const ClipSpec& spec);

}  // namespace latvsr::synth
