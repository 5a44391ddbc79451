#include "latvsr/synth.hpp"

#include <cmath>

namespace latvsr::synth {

Motion motion_from_string(const std::string& s) {
    if (s == "translate") return Motion::Translate;
    if (s == "rotate") return Motion::Rotate;
    if (s == "zoom") return Motion::Zoom;
    if (s == "mixed") return Motion::Mixed;
    throw std::invalid_argument("unknown motion kind: " + s);
}

std::string to_string(Motion m) {
    switch (m) {
        case Motion::Translate: return "translate";
        case Motion::Rotate: return "rotate";
        case Motion::Zoom: return "zoom";
        case Motion::Mixed: return "mixed";
    }
    throw std::logic_error("bad motion");
}

namespace {

// Periodic value-noise octave: a small random grid sampled with smoothstep
// interpolation, wrapping at the period.
struct NoiseOctave {
    int64_t g;
    std::vector<double> grid;

    NoiseOctave(int64_t g_, Rng& rng) : g(g_), grid(static_cast<size_t>(g_ * g_)) {
        for (auto& v : grid) v = rng.uniform();
    }

    double sample(double u, double v) const {
        // u, v in texture units [0,1) after wrapping
        double x = u * static_cast<double>(g), y = v * static_cast<double>(g);
        int64_t x0 = static_cast<int64_t>(std::floor(x)), y0 = static_cast<int64_t>(std::floor(y));
        double fx = x - static_cast<double>(x0), fy = y - static_cast<double>(y0);
        fx = fx * fx * (3.0 - 2.0 * fx);
        fy = fy * fy * (3.0 - 2.0 * fy);
        auto wrap = [this](int64_t i) { return ((i % g) + g) % g; };
        double v00 = grid[static_cast<size_t>(wrap(y0) * g + wrap(x0))];
        double v01 = grid[static_cast<size_t>(wrap(y0) * g + wrap(x0 + 1))];
        double v10 = grid[static_cast<size_t>(wrap(y0 + 1) * g + wrap(x0))];
        double v11 = grid[static_cast<size_t>(wrap(y0 + 1) * g + wrap(x0 + 1))];
        return v00 * (1 - fy) * (1 - fx) + v01 * (1 - fy) * fx + v10 * fy * (1 - fx) +
               v11 * fy * fx;
    }
};

struct TextureField {
    double period;
    std::vector<NoiseOctave> shared;                 // luminance octaves
    std::vector<std::vector<NoiseOctave>> chroma;    // one light octave set per channel
    bool checker = false;
    double checker_period = 12.0;

    double value(int64_t c, double px, double py) const {
        double u = px / period - std::floor(px / period);
        double v = py / period - std::floor(py / period);
        double lum = 0.0, wsum = 0.0, w = 1.0;
        for (const auto& o : shared) {
            lum += w * o.sample(u, v);
            wsum += w;
            w *= 0.55;
        }
        lum /= wsum;
        double tint = 0.0;
        wsum = 0.0;
        w = 1.0;
        for (const auto& o : chroma[static_cast<size_t>(c)]) {
            tint += w * o.sample(u, v);
            wsum += w;
            w *= 0.55;
        }
        tint /= wsum;
        double val = 0.72 * lum + 0.28 * tint;
        if (checker) {
            double cx = std::floor(px / checker_period), cy = std::floor(py / checker_period);
            double parity = std::fmod(std::fabs(cx + cy), 2.0) < 1.0 ? 0.0 : 1.0;
            val = 0.7 * val + 0.3 * parity;
        }
        return std::clamp(val, 0.0, 1.0);
    }
};

}  // namespace

SynthClip make_clip(const ClipSpec& spec) {
    if (spec.frames < 1 || spec.height < 8 || spec.width < 8)
        throw std::invalid_argument("make_clip: bad geometry");
    Rng rng = Rng::child(spec.seed, 0x5e1fu);

    TextureField tex;
    tex.period = 4.0 * static_cast<double>(std::max(spec.height, spec.width));
    std::vector<int64_t> grids = {6, 13, 27};
    if (spec.high_quality) {
        grids.push_back(53);
        grids.push_back(101);
    }
    for (int64_t g : grids) tex.shared.emplace_back(g, rng);
    for (int c = 0; c < 3; ++c) {
        std::vector<NoiseOctave> ch;
        ch.emplace_back(9, rng);
        ch.emplace_back(19, rng);
        tex.chroma.push_back(std::move(ch));
    }
    tex.checker = rng.uniform() < 0.4;
    tex.checker_period = 8.0 + rng.uniform() * 10.0;

    Motion motion = spec.motion;
    if (motion == Motion::Mixed) {
        double u = rng.uniform();
        motion = u < 1.0 / 3 ? Motion::Translate : (u < 2.0 / 3 ? Motion::Rotate : Motion::Zoom);
    }

    double vx = 0, vy = 0, omega = 0, zoom = 1.0;
    switch (motion) {
        case Motion::Translate: {
            double ang = rng.uniform() * 2.0 * M_PI;
            double speed = 0.5 + rng.uniform() * 1.0;  // px/frame
            vx = speed * std::cos(ang);
            vy = speed * std::sin(ang);
            if (spec.velocity) {
                vx = spec.velocity->first;
                vy = spec.velocity->second;
            }
            break;
        }
        case Motion::Rotate:
            omega = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (0.01 + rng.uniform() * 0.03);
            break;
        case Motion::Zoom:
            zoom = rng.uniform() < 0.5 ? 1.0 - (0.005 + rng.uniform() * 0.01)
                                       : 1.0 + (0.005 + rng.uniform() * 0.01);
            break;
        case Motion::Mixed:
            break;
    }

    int64_t T = spec.frames, H = spec.height, W = spec.width;
    double cx = static_cast<double>(W - 1) / 2.0, cy = static_cast<double>(H - 1) / 2.0;

    // Frame t samples the texture through the inverse motion at time t, so
    // the stored motion field is exact by construction.
    auto source_pos = [&](double x, double y, int64_t t, double& sx, double& sy) {
        switch (motion) {
            case Motion::Translate:
                sx = x - vx * static_cast<double>(t);
                sy = y - vy * static_cast<double>(t);
                break;
            case Motion::Rotate: {
                double a = -omega * static_cast<double>(t);
                double dx = x - cx, dy = y - cy;
                sx = cx + std::cos(a) * dx - std::sin(a) * dy;
                sy = cy + std::sin(a) * dx + std::cos(a) * dy;
                break;
            }
            case Motion::Zoom: {
                double k = std::pow(zoom, static_cast<double>(t));
                sx = cx + (x - cx) / k;
                sy = cy + (y - cy) / k;
                break;
            }
            case Motion::Mixed:
                sx = x;
                sy = y;
                break;
        }
    };

    SynthClip clip;
    clip.hr = Tensor({T, 3, H, W});
    for (int64_t t = 0; t < T; ++t)
        for (int64_t c = 0; c < 3; ++c)
            for (int64_t y = 0; y < H; ++y)
                for (int64_t x = 0; x < W; ++x) {
                    double sx, sy;
                    source_pos(static_cast<double>(x), static_cast<double>(y), t, sx, sy);
                    clip.hr.at4(t, c, y, x) = tex.value(c, sx, sy);
                }

    clip.motion_field = Tensor({std::max<int64_t>(T - 1, 0), 2, H, W});
    for (int64_t t = 0; t + 1 < T; ++t)
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x) {
                double dx = 0.0, dy = 0.0;
                switch (motion) {
                    case Motion::Translate:
                        dx = vx;
                        dy = vy;
                        break;
                    case Motion::Rotate: {
                        double px = static_cast<double>(x) - cx, py = static_cast<double>(y) - cy;
                        dx = std::cos(omega) * px - std::sin(omega) * py - px;
                        dy = std::sin(omega) * px + std::cos(omega) * py - py;
                        break;
                    }
                    case Motion::Zoom: {
                        dx = (zoom - 1.0) * (static_cast<double>(x) - cx);
                        dy = (zoom - 1.0) * (static_cast<double>(y) - cy);
                        break;
                    }
                    case Motion::Mixed:
                        break;
                }
                clip.motion_field.at4(t, 0, y, x) = dx;
                clip.motion_field.at4(t, 1, y, x) = dy;
            }

    clip.meta = json{{"motion", to_string(motion)},
                     {"vx", vx},
                     {"vy", vy},
                     {"omega", omega},
                     {"zoom", zoom},
                     {"high_quality", spec.high_quality},
                     {"seed", spec.seed}};
    return clip;
}

}  // namespace latvsr::synth
