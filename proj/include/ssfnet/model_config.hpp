#pragma once

#include <string>

#include "ssfnet/ops.hpp"

namespace ssfnet {

/// Architecture hyperparameters. Defaults are desk scale; the full-size
/// network uses channels = 256.
struct ModelConfig {
    int bands = 16;            // spectral bands of the HS input
    int channels = 8;          // C; stage widths are C, 2C, 4C, 8C
    int blocks_per_stage = 2;
    int spectral_filters = 1;  // 3-D filters in the spectral branch of each S2C
    int safm_kernel = 5;       // 1-D channel-conv kernel inside SAFM
    int head_width = 16;       // CLS/LOC tower width
    int embed_dim = 16;        // SAA embedding width
    double loc_cap = 6.0;      // raw LOC outputs are capped before exp
    bool rgb_frozen = true;
    std::string rgb_checkpoint;  // optional externally converted weights for the RGB stream

    bool operator==(const ModelConfig&) const = default;
};

/// Per-call execution switches.
struct RunMode {
    ops::NormMode norm = ops::NormMode::Batch;
    double bn_momentum = 0.1;
    /// Replaces every ReLU by the identity (linearity tests only).
    bool identity_activations = false;
};

inline RunMode training_mode() { return RunMode{ops::NormMode::Batch, 0.1, false}; }
inline RunMode inference_mode() { return RunMode{ops::NormMode::Running, 0.1, false}; }

}  // namespace ssfnet
