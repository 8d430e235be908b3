#pragma once

#include <random>
#include <string>

#include "ssfnet/backbone.hpp"

namespace ssfnet {

/// Per-stage (or aggregated) prediction maps for a batch.
struct PredictionMaps {
    Var cls;  // [N,h,w,2] background / foreground logits
    Var loc;  // [N,h,w,4] l,t,r,b offsets in search-crop pixels, strictly positive
    Var saa;  // [N,h,w,1] spectral-angle affinity (HS stream only)
    Var sim;  // [N,h,w,1] mean per-position cosine between embeddings (HS stream only)
};

/// Location of output-map cell (i, j) in search-crop coordinates:
/// (origin + j * stride, origin + i * stride).
struct MapGeometry {
    int height = 0;
    int width = 0;
    double stride = 4.0;
    double origin_x = 0.0;
    double origin_y = 0.0;

    double point_x(int j) const { return origin_x + j * stride; }
    double point_y(int i) const { return origin_y + i * stride; }
    /// Cells are centred on the search crop.
    static MapGeometry centered(int height, int width, double stride, int search_size);
};

/// Backbone stride of stages 2-4.
inline constexpr double kFeatureStride = 4.0;

enum class HeadKind {
    HS,   // CLS + LOC + SAA, names under `head.`
    RGB,  // CLS + LOC only, names under `rgb.head.`
};

/// Per-stage channel adapters plus shared towers for stages 2-4.
void init_head(ParamStore& store, const ModelConfig& cfg, HeadKind kind, std::mt19937_64& rng);

/// SAA branch: per-position L2-normalised embeddings E_z(f_z), E_x(f_x),
/// depth-wise cross-correlated, collapsed to one channel by a 1x1 conv.
/// Also returns the channel mean of the correlation scaled by the template
/// area, i.e. the mean cosine used by the metric loss.
PredictionMaps saa_forward(ParamStore& store, int stage, const Var& f_z, const Var& f_x);

/// CLS and LOC branches: 1x1 adapters, depth-wise cross-correlation, 1x1 towers.
PredictionMaps cls_loc_forward(ParamStore& store, const ModelConfig& cfg, HeadKind kind, int stage, const Var& f_z,
                               const Var& f_x);

/// All branches of one stage.
PredictionMaps head_forward(ParamStore& store, const ModelConfig& cfg, HeadKind kind, int stage, const Var& f_z,
                            const Var& f_x);

/// Box (x1,y1,x2,y2 as BoundingBox) implied by offsets at a map point.
struct Corners {
    double x1, y1, x2, y2;
};
inline Corners decode_offsets(double px, double py, double l, double t, double r, double b) {
    return Corners{px - l, py - t, px + r, py + b};
}

}  // namespace ssfnet
