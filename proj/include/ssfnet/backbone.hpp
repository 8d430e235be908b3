#pragma once

#include <array>
#include <random>
#include <string>

#include "ssfnet/model_config.hpp"

namespace ssfnet {

enum class Stream { HS, RGB };

struct StageSpec {
    int stage_index = 1;
    int out_channels = 0;
    bool downsample = false;
    int block_count = 0;
};

std::array<StageSpec, 4> stage_specs(const ModelConfig& cfg);

/// Stage-indexed features of one stream. Stage 1 is H/2 x W/2 x C, stage 2 is
/// H/4 x W/4 x 2C, stages 3 and 4 keep H/4 x W/4 at 4C and 8C.
struct FeaturePyramid {
    Stream stream = Stream::HS;
    std::array<Var, 4> stages;

    const Var& stage(int index) const { return stages.at(index - 1); }
    Var& stage(int index) { return stages.at(index - 1); }
};

// S2C: parallel spatial (depth-wise 3x3 + point-wise) and spectral (3x3x3 over
// the channel axis + point-wise) branches, summed.
void init_s2c(ParamStore& store, const std::string& prefix, int in_channels, int out_channels,
              int spectral_filters, std::mt19937_64& rng);
Var s2c_forward(ParamStore& store, const std::string& prefix, const Var& x, int stride);

// S2CB: two S2C layers with BN/ReLU and a residual shortcut (1x1 projection when
// channels or resolution change).
void init_s2cb(ParamStore& store, const std::string& prefix, int in_channels, int out_channels, bool downsample,
               int spectral_filters, std::mt19937_64& rng);
Var s2cb_forward(ParamStore& store, const std::string& prefix, const Var& x, bool downsample, const RunMode& mode);

void init_s2fb(ParamStore& store, const ModelConfig& cfg, std::mt19937_64& rng);
/// hs: [N,H,W,B] with H and W divisible by 4.
FeaturePyramid s2fb_forward(ParamStore& store, const ModelConfig& cfg, const Var& hs, const RunMode& mode);

/// Stage-compatible residual CNN standing in for the RGB ResNet.
void init_rgb_backbone(ParamStore& store, const ModelConfig& cfg, std::mt19937_64& rng);
FeaturePyramid rgb_forward(ParamStore& store, const ModelConfig& cfg, const Var& rgb, const RunMode& mode);

}  // namespace ssfnet
