#include "ssfnet/fusion.hpp"

#include "ssfnet/error.hpp"

namespace ssfnet {

void init_safm(ParamStore& store, const std::string& prefix, int kernel, std::mt19937_64& rng) {
    if (kernel < 1 || kernel % 2 == 0) throw ConfigError("SAFM kernel size must be odd and positive");
    for (const char* role : {".intra", ".inter"}) {
        store.add(prefix + role + ".weight", Tensor::randn(Shape{1, 1, 1, kernel}, rng, 0.2));
        store.add(prefix + role + ".bias", Tensor::zeros(Shape{1, 1, 1, 1}));
    }
}

SafmResult safm_fuse(ParamStore& store, const std::string& prefix, const Var& R_f, const Var& H_f) {
    if (!(R_f.shape() == H_f.shape())) {
        throw ShapeError("safm: RGB " + R_f.shape().str() + " and HS " + H_f.shape().str() + " features differ");
    }
    const Var intra_w = store.use(prefix + ".intra.weight");
    const Var intra_b = store.use(prefix + ".intra.bias");
    const Var inter_w = store.use(prefix + ".inter.weight");
    const Var inter_b = store.use(prefix + ".inter.bias");

    const Var R_a = ops::global_avg_pool(R_f);
    const Var H_a = ops::global_avg_pool(H_f);
    const Var R_e_intra = ops::conv1d_channels(R_a, intra_w, intra_b);
    const Var H_e_intra = ops::conv1d_channels(H_a, intra_w, intra_b);
    const Var R_e_inter = ops::conv1d_channels(R_a, inter_w, inter_b);
    const Var H_e_inter = ops::conv1d_channels(H_a, inter_w, inter_b);

    const Var W_R = ops::sigmoid(R_e_intra);
    const Var W_H = ops::sigmoid(H_e_intra);
    // Two-way softmax over the modality axis: softmax(a, b)[0] = sigmoid(a - b).
    const Var W0 = ops::sigmoid(ops::sub(R_e_inter, H_e_inter));
    const Var W1 = ops::sigmoid(ops::sub(H_e_inter, R_e_inter));

    Var fused = ops::add(ops::mul_channel(R_f, W_R), ops::mul_channel(H_f, W_H));
    fused = ops::add(fused, ops::mul_channel(R_f, W0));
    fused = ops::add(fused, ops::mul_channel(H_f, W1));

    SafmResult out;
    out.fused = fused;
    out.state = AttentionState{R_a.value(),       H_a.value(),       R_e_intra.value(), H_e_intra.value(),
                               R_e_inter.value(), H_e_inter.value(), W_R.value(),       W_H.value(),
                               W0.value(),        W1.value()};
    return out;
}

void init_fusion(ParamStore& store, const ModelConfig& cfg, std::mt19937_64& rng) {
    for (int stage : kFusedStages) init_safm(store, "safm.stage" + std::to_string(stage), cfg.safm_kernel, rng);
}

FeaturePyramid fuse_pyramids(ParamStore& store, const FeaturePyramid& rgb, const FeaturePyramid& hs) {
    FeaturePyramid out = hs;
    for (int stage = 1; stage <= 4; ++stage) {
        if (!rgb.stage(stage).defined() || !hs.stage(stage).defined()) {
            throw ShapeError("fuse_pyramids: missing stage " + std::to_string(stage));
        }
    }
    for (int stage : kFusedStages) {
        out.stage(stage) = safm_fuse(store, "safm.stage" + std::to_string(stage), rgb.stage(stage), hs.stage(stage)).fused;
    }
    return out;
}

}  // namespace ssfnet
