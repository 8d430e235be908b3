#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ssfnet/data.hpp"

namespace ssfnet {

enum class MotionModel { Static, Linear, Circular };

std::string to_string(MotionModel m);
MotionModel motion_from_string(const std::string& s);

struct SynthConfig {
    int frames = 20;
    int height = 128;
    int width = 128;
    int bands = 16;
    int object_w = 16;
    int object_h = 16;
    /// Per-band reflectance of the object; empty selects a smooth default curve.
    std::vector<double> object_signature;
    /// One or two background curves blended by a fixed spatial texture; empty selects defaults.
    std::vector<std::vector<double>> background_signatures;
    MotionModel motion = MotionModel::Linear;
    double velocity_x = 2.5;  // px/frame (linear) or rad/frame scaled by radius (circular)
    double velocity_y = 1.5;
    double noise = 0.01;
    /// Relative amplitude of the stripe pattern painted on object and distractor.
    double texture = 0.15;
    bool distractor = true;
    /// Distractor orbits the object at this centre distance (px).
    double distractor_radius = 24.0;
    double distractor_angular_speed = 0.15;
    std::vector<std::string> attributes;
    std::uint64_t seed = 7;
    std::string name = "synthetic";

    bool operator==(const SynthConfig&) const = default;
};

struct SynthTrajectory {
    std::vector<BoundingBox> object;
    std::vector<BoundingBox> distractor;  // empty when disabled
};

/// Spectral curve with the same values on the false-colour band triplet as
/// `reference` but a different shape elsewhere.
std::vector<double> metameric_signature(const std::vector<double>& reference);

std::vector<double> default_object_signature(int bands);
std::vector<std::vector<double>> default_background_signatures(int bands);

/// Integer-aligned boxes of object and distractor for every frame.
SynthTrajectory synth_trajectory(const SynthConfig& cfg);

/// Deterministic scene: textured two-material background, a moving object with
/// its own signature, optional metameric distractor. The RGB leg is the
/// false-colour rendering of the noise-free cube, so object and distractor are
/// pixel-identical there while their spectra differ.
Sequence synth_sequence(const SynthConfig& cfg);

}  // namespace ssfnet
