#pragma once

#include <random>
#include <string>

#include "ssfnet/backbone.hpp"

namespace ssfnet {

/// Intermediates of one SAFM evaluation, one row per batch sample.
/// W_inter row 0 weighs the RGB features, row 1 the HS features.
struct AttentionState {
    Tensor R_a, H_a;                    // [N,1,1,C] pooled descriptors
    Tensor R_e_intra, H_e_intra;        // intra-modality embeddings
    Tensor R_e_inter, H_e_inter;        // inter-modality embeddings (the two rows of E)
    Tensor W_R_intra, W_H_intra;        // sigmoid gates
    Tensor W_inter0, W_inter1;          // softmax over the modality axis
};

struct SafmResult {
    Var fused;
    AttentionState state;
};

/// Registers `<prefix>.intra.{weight,bias}` and `<prefix>.inter.{weight,bias}`.
void init_safm(ParamStore& store, const std::string& prefix, int kernel, std::mt19937_64& rng);

/// Channel attention fusion of same-shaped RGB and HS features:
///   fused = sig(C1(R_a)) * R_f + sig(C1(H_a)) * H_f + W[0] * R_f + W[1] * H_f
/// with W = softmax over {C2(R_a), C2(H_a)}, C1/C2 the intra/inter 1-D channel convs.
SafmResult safm_fuse(ParamStore& store, const std::string& prefix, const Var& R_f, const Var& H_f);

/// Stages with fusion applied.
inline constexpr int kFusedStages[] = {2, 3, 4};

void init_fusion(ParamStore& store, const ModelConfig& cfg, std::mt19937_64& rng);
/// Replaces stages 2-4 of the HS pyramid by their fused versions (one SAFM per
/// stage, `safm.stage{i}`); stage 1 passes through.
FeaturePyramid fuse_pyramids(ParamStore& store, const FeaturePyramid& rgb, const FeaturePyramid& hs);

}  // namespace ssfnet
