#include "ssfnet/backbone.hpp"

#include "layers.hpp"
#include "ssfnet/error.hpp"

namespace ssfnet {

using layers::add_bn;
using layers::add_conv;
using layers::he_normal;

std::array<StageSpec, 4> stage_specs(const ModelConfig& cfg) {
    std::array<StageSpec, 4> specs;
    for (int i = 0; i < 4; ++i) {
        specs[i] = StageSpec{i + 1, cfg.channels << i, i < 2, cfg.blocks_per_stage};
    }
    return specs;
}

void init_s2c(ParamStore& store, const std::string& prefix, int in_channels, int out_channels, int spectral_filters,
              std::mt19937_64& rng) {
    if (spectral_filters < 1) throw ConfigError("spectral_filters must be >= 1");
    // Each branch gets half the variance so their sum keeps He scaling.
    const double gain = std::sqrt(0.5);
    store.add(prefix + ".spatial.dw.weight", he_normal(Shape{3, 3, 1, in_channels}, 9, rng));
    add_conv(store, prefix + ".spatial.pw", 1, in_channels, out_channels, rng, gain);
    store.add(prefix + ".spectral.conv3d.weight", he_normal(Shape{spectral_filters, 3, 3, 3}, 27, rng));
    store.add(prefix + ".spectral.conv3d.bias", Tensor::zeros(Shape{1, 1, 1, spectral_filters}));
    add_conv(store, prefix + ".spectral.pw", 1, spectral_filters * in_channels, out_channels, rng, gain);
}

Var s2c_forward(ParamStore& store, const std::string& prefix, const Var& x, int stride) {
    Var spatial = ops::depthwise(x, store.use(prefix + ".spatial.dw.weight"), stride, 1);
    spatial = ops::pointwise(spatial, store.use(prefix + ".spatial.pw.weight"), store.use(prefix + ".spatial.pw.bias"));
    Var spectral = ops::spectral_conv3d(x, store.use(prefix + ".spectral.conv3d.weight"),
                                        store.use(prefix + ".spectral.conv3d.bias"), stride);
    spectral =
        ops::pointwise(spectral, store.use(prefix + ".spectral.pw.weight"), store.use(prefix + ".spectral.pw.bias"));
    if (!(spatial.shape() == spectral.shape())) {
        throw ShapeError("s2c: branch outputs disagree " + spatial.shape().str() + " vs " + spectral.shape().str());
    }
    return ops::add(spatial, spectral);
}

namespace {

bool needs_projection(int in_channels, int out_channels, bool downsample) {
    return downsample || in_channels != out_channels;
}

}  // namespace

void init_s2cb(ParamStore& store, const std::string& prefix, int in_channels, int out_channels, bool downsample,
               int spectral_filters, std::mt19937_64& rng) {
    init_s2c(store, prefix + ".s2c1", in_channels, out_channels, spectral_filters, rng);
    add_bn(store, prefix + ".bn1", out_channels);
    init_s2c(store, prefix + ".s2c2", out_channels, out_channels, spectral_filters, rng);
    add_bn(store, prefix + ".bn2", out_channels);
    if (needs_projection(in_channels, out_channels, downsample)) {
        add_conv(store, prefix + ".shortcut", 1, in_channels, out_channels, rng);
    }
}

Var s2cb_forward(ParamStore& store, const std::string& prefix, const Var& x, bool downsample, const RunMode& mode) {
    const int stride = downsample ? 2 : 1;
    Var y = s2c_forward(store, prefix + ".s2c1", x, stride);
    y = layers::act(layers::bn(store, prefix + ".bn1", y, mode), mode);
    y = s2c_forward(store, prefix + ".s2c2", y, 1);
    y = layers::bn(store, prefix + ".bn2", y, mode);
    Var shortcut = x;
    if (store.contains(prefix + ".shortcut.weight")) {
        shortcut = ops::conv2d(x, store.use(prefix + ".shortcut.weight"), store.use(prefix + ".shortcut.bias"), stride, 0);
    }
    if (!(shortcut.shape() == y.shape())) {
        throw ShapeError("s2cb: shortcut " + shortcut.shape().str() + " does not match " + y.shape().str());
    }
    return layers::act(ops::add(y, shortcut), mode);
}

namespace {

std::string block_prefix(const std::string& stream, int stage, int block) {
    return stream + ".stage" + std::to_string(stage) + ".block" + std::to_string(block);
}

void check_divisible(const Shape& s) {
    if (s.h % 4 != 0 || s.w % 4 != 0) {
        throw ShapeError("backbone input " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                         " is not divisible by 4");
    }
}

}  // namespace

void init_s2fb(ParamStore& store, const ModelConfig& cfg, std::mt19937_64& rng) {
    int in = cfg.bands;
    for (const auto& spec : stage_specs(cfg)) {
        for (int b = 0; b < spec.block_count; ++b) {
            init_s2cb(store, block_prefix("hs", spec.stage_index, b), in, spec.out_channels, spec.downsample && b == 0,
                      cfg.spectral_filters, rng);
            in = spec.out_channels;
        }
    }
}

FeaturePyramid s2fb_forward(ParamStore& store, const ModelConfig& cfg, const Var& hs, const RunMode& mode) {
    check_divisible(hs.shape());
    if (hs.shape().c != cfg.bands) {
        throw ShapeError("s2fb: input has " + std::to_string(hs.shape().c) + " bands, model expects " +
                         std::to_string(cfg.bands));
    }
    FeaturePyramid pyr;
    pyr.stream = Stream::HS;
    Var x = hs;
    for (const auto& spec : stage_specs(cfg)) {
        for (int b = 0; b < spec.block_count; ++b) {
            x = s2cb_forward(store, block_prefix("hs", spec.stage_index, b), x, spec.downsample && b == 0, mode);
        }
        pyr.stage(spec.stage_index) = x;
    }
    return pyr;
}

void init_rgb_backbone(ParamStore& store, const ModelConfig& cfg, std::mt19937_64& rng) {
    int in = 3;
    for (const auto& spec : stage_specs(cfg)) {
        for (int b = 0; b < spec.block_count; ++b) {
            const std::string p = block_prefix("rgb", spec.stage_index, b);
            add_conv(store, p + ".conv1", 3, in, spec.out_channels, rng);
            add_bn(store, p + ".bn1", spec.out_channels);
            add_conv(store, p + ".conv2", 3, spec.out_channels, spec.out_channels, rng);
            add_bn(store, p + ".bn2", spec.out_channels);
            if (needs_projection(in, spec.out_channels, spec.downsample && b == 0)) {
                add_conv(store, p + ".shortcut", 1, in, spec.out_channels, rng);
            }
            in = spec.out_channels;
        }
    }
}

FeaturePyramid rgb_forward(ParamStore& store, const ModelConfig& cfg, const Var& rgb, const RunMode& mode) {
    check_divisible(rgb.shape());
    if (rgb.shape().c != 3) throw ShapeError("rgb_forward: expected 3 channels, got " + rgb.shape().str());
    RunMode m = mode;
    if (cfg.rgb_frozen) m.norm = ops::NormMode::Running;
    FeaturePyramid pyr;
    pyr.stream = Stream::RGB;
    Var x = rgb;
    for (const auto& spec : stage_specs(cfg)) {
        for (int b = 0; b < spec.block_count; ++b) {
            const std::string p = block_prefix("rgb", spec.stage_index, b);
            const int stride = (spec.downsample && b == 0) ? 2 : 1;
            Var y = layers::act(layers::bn(store, p + ".bn1", layers::conv(store, p + ".conv1", x, stride), m), m);
            y = layers::bn(store, p + ".bn2", layers::conv(store, p + ".conv2", y), m);
            Var shortcut = x;
            if (store.contains(p + ".shortcut.weight")) shortcut = layers::conv(store, p + ".shortcut", x, stride);
            x = layers::act(ops::add(y, shortcut), m);
        }
        pyr.stage(spec.stage_index) = x;
    }
    return pyr;
}

}  // namespace ssfnet
