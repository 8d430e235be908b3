#include "ssfnet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "ssfnet/error.hpp"

namespace ssfnet {

std::string to_string(MotionModel m) {
    switch (m) {
        case MotionModel::Static: return "static";
        case MotionModel::Linear: return "linear";
        case MotionModel::Circular: return "circular";
    }
    return "linear";
}

MotionModel motion_from_string(const std::string& s) {
    if (s == "static") return MotionModel::Static;
    if (s == "linear") return MotionModel::Linear;
    if (s == "circular") return MotionModel::Circular;
    throw ConfigError("unknown motion model '" + s + "' (expected static, linear, circular)");
}

std::vector<double> default_object_signature(int bands) {
    std::vector<double> sig(bands);
    for (int b = 0; b < bands; ++b) {
        const double t = bands > 1 ? static_cast<double>(b) / (bands - 1) : 0.0;
        sig[b] = 0.35 + 0.3 * (0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * 1.25 * t + 0.3));
    }
    return sig;
}

std::vector<std::vector<double>> default_background_signatures(int bands) {
    std::vector<double> a(bands), b(bands);
    for (int i = 0; i < bands; ++i) {
        const double t = bands > 1 ? static_cast<double>(i) / (bands - 1) : 0.0;
        a[i] = 0.15 + 0.25 * t;
        b[i] = 0.55 - 0.2 * t;
    }
    return {a, b};
}

std::vector<double> metameric_signature(const std::vector<double>& reference) {
    const int bands = static_cast<int>(reference.size());
    const auto triplet = rgb_band_triplet(bands);
    double mean = 0.0;
    for (double v : reference) mean += v;
    mean /= std::max(1, bands);
    std::vector<double> out(bands);
    for (int b = 0; b < bands; ++b) {
        const bool keep = b == triplet[0] || b == triplet[1] || b == triplet[2];
        // mirror around the mean, then push further away so the curves differ clearly
        out[b] = keep ? reference[b] : std::clamp(2.0 * mean - reference[b] + 0.15 * ((b % 2) ? 1.0 : -1.0), 0.02, 0.98);
    }
    return out;
}

namespace {

BoundingBox aligned_box(double cx, double cy, int w, int h, int frame_w, int frame_h) {
    double x = std::round(cx - 0.5 * w);
    double y = std::round(cy - 0.5 * h);
    x = std::clamp(x, 0.0, static_cast<double>(frame_w - w));
    y = std::clamp(y, 0.0, static_cast<double>(frame_h - h));
    return BoundingBox{x, y, static_cast<double>(w), static_cast<double>(h)};
}

void check_signature(const std::vector<double>& sig, int bands, const char* what) {
    if (static_cast<int>(sig.size()) != bands) {
        throw ConfigError(std::string(what) + " has " + std::to_string(sig.size()) + " values, expected " +
                          std::to_string(bands));
    }
}

}  // namespace

SynthTrajectory synth_trajectory(const SynthConfig& cfg) {
    if (cfg.frames < 1 || cfg.height < 1 || cfg.width < 1 || cfg.bands < 1) {
        throw ConfigError("synth: frames, height, width and bands must be positive");
    }
    if (cfg.object_w < 1 || cfg.object_h < 1 || cfg.object_w > cfg.width || cfg.object_h > cfg.height) {
        throw DataError("synth: object " + std::to_string(cfg.object_w) + "x" + std::to_string(cfg.object_h) +
                        " larger than frame " + std::to_string(cfg.width) + "x" + std::to_string(cfg.height));
    }
    SynthTrajectory traj;
    const double lo_x = 0.5 * cfg.object_w;
    const double hi_x = cfg.width - 0.5 * cfg.object_w;
    const double lo_y = 0.5 * cfg.object_h;
    const double hi_y = cfg.height - 0.5 * cfg.object_h;
    double cx = 0.5 * cfg.width;
    double cy = 0.5 * cfg.height;
    double vx = cfg.velocity_x;
    double vy = cfg.velocity_y;
    const double orbit = 0.25 * std::min(cfg.width, cfg.height);
    for (int t = 0; t < cfg.frames; ++t) {
        double ox = cx;
        double oy = cy;
        if (cfg.motion == MotionModel::Circular) {
            const double angle = orbit > 0.0 ? t * cfg.velocity_x / orbit : 0.0;
            ox = 0.5 * cfg.width + orbit * std::cos(angle) - orbit;
            oy = 0.5 * cfg.height + orbit * std::sin(angle);
            ox = std::clamp(ox, lo_x, hi_x);
            oy = std::clamp(oy, lo_y, hi_y);
        }
        traj.object.push_back(aligned_box(ox, oy, cfg.object_w, cfg.object_h, cfg.width, cfg.height));
        if (cfg.distractor) {
            const double angle = 0.25 * std::numbers::pi + t * cfg.distractor_angular_speed;
            traj.distractor.push_back(aligned_box(ox + cfg.distractor_radius * std::cos(angle),
                                                  oy + cfg.distractor_radius * std::sin(angle), cfg.object_w,
                                                  cfg.object_h, cfg.width, cfg.height));
        }
        if (cfg.motion == MotionModel::Linear) {
            cx += vx;
            cy += vy;
            if (cx < lo_x || cx > hi_x) {
                vx = -vx;
                cx = std::clamp(cx, lo_x, hi_x);
            }
            if (cy < lo_y || cy > hi_y) {
                vy = -vy;
                cy = std::clamp(cy, lo_y, hi_y);
            }
        }
    }
    return traj;
}

Sequence synth_sequence(const SynthConfig& cfg) {
    const SynthTrajectory traj = synth_trajectory(cfg);
    const int B = cfg.bands;
    const std::vector<double> object = cfg.object_signature.empty() ? default_object_signature(B) : cfg.object_signature;
    check_signature(object, B, "object_signature");
    auto backgrounds = cfg.background_signatures.empty() ? default_background_signatures(B) : cfg.background_signatures;
    for (const auto& bg : backgrounds) check_signature(bg, B, "background signature");
    if (backgrounds.size() == 1) backgrounds.push_back(backgrounds.front());
    if (backgrounds.size() != 2) throw ConfigError("synth: one or two background signatures expected");
    const std::vector<double> distractor = metameric_signature(object);

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    const double phx = phase(rng);
    const double phy = phase(rng);
    std::normal_distribution<double> noise(0.0, 1.0);

    Sequence seq;
    seq.name = cfg.name;
    seq.attributes.insert(cfg.attributes.begin(), cfg.attributes.end());
    const int H = cfg.height;
    const int W = cfg.width;
    for (int t = 0; t < cfg.frames; ++t) {
        Tensor clean(Shape{1, H, W, B});
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const double mix = 0.5 + 0.5 * std::sin(0.21 * x + phx) * std::cos(0.17 * y + phy);
                for (int b = 0; b < B; ++b)
                    clean.at(0, y, x, b) = mix * backgrounds[0][b] + (1.0 - mix) * backgrounds[1][b];
            }
        auto paint = [&](const BoundingBox& box, const std::vector<double>& sig) {
            const int x0 = static_cast<int>(box.x);
            const int y0 = static_cast<int>(box.y);
            for (int v = 0; v < cfg.object_h; ++v)
                for (int u = 0; u < cfg.object_w; ++u) {
                    const double stripe = ((u / 2 + v / 4) % 2 == 0) ? 1.0 : 1.0 - cfg.texture;
                    for (int b = 0; b < B; ++b) clean.at(0, y0 + v, x0 + u, b) = sig[b] * stripe;
                }
        };
        if (cfg.distractor) paint(traj.distractor[t], distractor);
        paint(traj.object[t], object);

        HSCube clean_cube(clean);
        RGBImage rgb = synthesize_rgb(clean_cube);
        Tensor noisy = std::move(clean);
        if (cfg.noise > 0.0) {
            for (auto& v : noisy.data) v += cfg.noise * noise(rng);
        }
        seq.frames.push_back(Frame{HSCube(std::move(noisy)), std::move(rgb)});
        seq.annotations.push_back(traj.object[t]);
    }
    seq.validate();
    return seq;
}

}  // namespace ssfnet
