#include "ssfnet/head.hpp"

#include "layers.hpp"
#include "ssfnet/error.hpp"

namespace ssfnet {

MapGeometry MapGeometry::centered(int height, int width, double stride, int search_size) {
    MapGeometry g;
    g.height = height;
    g.width = width;
    g.stride = stride;
    g.origin_x = 0.5 * search_size - 0.5 * (width - 1) * stride;
    g.origin_y = 0.5 * search_size - 0.5 * (height - 1) * stride;
    return g;
}

namespace {

std::string root(HeadKind kind) { return kind == HeadKind::HS ? "head" : "rgb.head"; }

std::string stage_tag(int stage) { return ".stage" + std::to_string(stage); }

void init_branch(ParamStore& store, const std::string& p, const ModelConfig& cfg, int out, std::mt19937_64& rng) {
    for (int stage = 2; stage <= 4; ++stage) {
        const int c = cfg.channels << (stage - 1);
        layers::add_conv(store, p + ".adjust_z" + stage_tag(stage), 1, c, cfg.head_width, rng);
        layers::add_conv(store, p + ".adjust_x" + stage_tag(stage), 1, c, cfg.head_width, rng);
    }
    layers::add_conv(store, p + ".tower", 1, cfg.head_width, cfg.head_width, rng);
    store.add(p + ".out.weight", Tensor::randn(Shape{1, 1, cfg.head_width, out}, rng, 0.01));
    store.add(p + ".out.bias", Tensor::zeros(Shape{1, 1, 1, out}));
}

Var branch_forward(ParamStore& store, const std::string& p, int stage, const Var& f_z, const Var& f_x) {
    // Unit-norm adjusted features make the correlation independent of backbone activation
    // scale, which grows with depth and with fusion; width / area brings channels to O(1).
    const Var z = ops::l2_normalize_channels(layers::conv(store, p + ".adjust_z" + stage_tag(stage), f_z));
    const Var x = ops::l2_normalize_channels(layers::conv(store, p + ".adjust_x" + stage_tag(stage), f_x));
    const double area = static_cast<double>(z.shape().h) * z.shape().w;
    Var y = ops::scale(ops::dw_xcorr(z, x), static_cast<double>(z.shape().c) / area);
    y = ops::relu(layers::conv(store, p + ".tower", y));
    return layers::conv(store, p + ".out", y);
}

}  // namespace

void init_head(ParamStore& store, const ModelConfig& cfg, HeadKind kind, std::mt19937_64& rng) {
    const std::string r = root(kind);
    init_branch(store, r + ".cls", cfg, 2, rng);
    init_branch(store, r + ".loc", cfg, 4, rng);
    if (kind == HeadKind::HS) {
        for (int stage = 2; stage <= 4; ++stage) {
            const int c = cfg.channels << (stage - 1);
            layers::add_conv(store, "head.saa.embed_z" + stage_tag(stage), 1, c, cfg.embed_dim, rng);
            layers::add_conv(store, "head.saa.embed_x" + stage_tag(stage), 1, c, cfg.embed_dim, rng);
        }
        // Uniform positive projection: the affinity map starts as the mean
        // correlation of the normalised embeddings.
        store.add("head.saa.proj.weight", Tensor(Shape{1, 1, cfg.embed_dim, 1}, 1.0 / cfg.embed_dim));
        store.add("head.saa.proj.bias", Tensor::zeros(Shape{1, 1, 1, 1}));
    }
}

PredictionMaps saa_forward(ParamStore& store, int stage, const Var& f_z, const Var& f_x) {
    const Var ez = ops::l2_normalize_channels(layers::conv(store, "head.saa.embed_z" + stage_tag(stage), f_z));
    const Var ex = ops::l2_normalize_channels(layers::conv(store, "head.saa.embed_x" + stage_tag(stage), f_x));
    const Var corr = ops::dw_xcorr(ez, ex);
    PredictionMaps maps;
    maps.saa = layers::conv(store, "head.saa.proj", corr);
    const double area = static_cast<double>(f_z.shape().h) * f_z.shape().w;
    maps.sim = ops::scale(ops::channel_sum(corr), 1.0 / area);
    return maps;
}

PredictionMaps cls_loc_forward(ParamStore& store, const ModelConfig& cfg, HeadKind kind, int stage, const Var& f_z,
                               const Var& f_x) {
    if (f_z.shape().c != f_x.shape().c) throw ShapeError("head: template/search channel mismatch");
    const std::string r = root(kind);
    PredictionMaps maps;
    maps.cls = branch_forward(store, r + ".cls", stage, f_z, f_x);
    const Var raw = branch_forward(store, r + ".loc", stage, f_z, f_x);
    maps.loc = ops::scale(ops::exp_capped(raw, cfg.loc_cap), kFeatureStride);
    return maps;
}

PredictionMaps head_forward(ParamStore& store, const ModelConfig& cfg, HeadKind kind, int stage, const Var& f_z,
                            const Var& f_x) {
    PredictionMaps maps = cls_loc_forward(store, cfg, kind, stage, f_z, f_x);
    if (kind == HeadKind::HS) {
        PredictionMaps saa = saa_forward(store, stage, f_z, f_x);
        maps.saa = saa.saa;
        maps.sim = saa.sim;
    }
    return maps;
}

}  // namespace ssfnet
