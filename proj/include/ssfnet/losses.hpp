#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ssfnet/data.hpp"
#include "ssfnet/head.hpp"

namespace ssfnet {

enum class Region : std::uint8_t { Neg = 0, Ignore = 1, Pos = 2 };

/// Ellipse-based labels of one output map. Cell (i, j) sits at map coordinate (x=j, y=i).
struct RegionLabels {
    int height = 0;
    int width = 0;
    std::vector<Region> label;  // row-major
    std::vector<int> pos;       // flat indices
    std::vector<int> neg;
    bool center_outside = false;

    Region at(int i, int j) const { return label[static_cast<std::size_t>(i) * width + j]; }
};

/// gt_map is the ground-truth box expressed in map units. E1 has semi-axes
/// (w/4, h/4) and E2 (w/2, h/2), both centred on the box; POS inside E1, NEG
/// outside E2, IGNORE in between. A centre outside the map yields all-NEG
/// labels with center_outside set.
RegionLabels assign_regions(const BoundingBox& gt_map, int height, int width);

/// Converts a box in search-crop pixels into map units for the given geometry.
BoundingBox crop_box_to_map(const BoundingBox& crop_box, const MapGeometry& geom);

struct LossWeights {
    double alpha = 1.0;  // CLS
    double beta = 2.0;   // LOC
    double gamma = 1.0;  // SAAL
    bool operator==(const LossWeights&) const = default;
};

/// Scalar metric-loss value from explicit similarity lists:
/// mean(neg) - mean(pos). Empty lists contribute 0.
double saal_value(std::span<const double> sim_pos, std::span<const double> sim_neg);

struct LossFlags {
    int empty_pos = 0;  // samples whose POS set was empty
    int empty_neg = 0;
    int center_outside = 0;
};

/// SAAL over a batch: per sample mean_n Sim - mean_p Sim on the cosine map
/// sim [N,h,w,1], averaged over samples that have both sets.
Var saal_loss(const Var& sim, std::span<const RegionLabels> labels, LossFlags* flags = nullptr);

/// Class-balanced softmax cross-entropy on cls [N,h,w,2] (channel 1 = foreground):
/// per sample 0.5 * (mean CE over POS + mean CE over NEG), or the single
/// available class mean when one set is empty; averaged over the batch.
Var cls_loss(const Var& cls, std::span<const RegionLabels> labels);

/// UnitBox IoU loss on loc [N,h,w,4]: mean over POS cells of -ln(IoU) with IoU
/// clamped to [1e-6, 1]; gt_crop holds each sample's box in search-crop pixels.
Var loc_loss(const Var& loc, std::span<const BoundingBox> gt_crop, std::span<const RegionLabels> labels,
             const MapGeometry& geom);

struct LossParts {
    Var cls;
    Var loc;
    Var saal;
    Var total;

    double cls_value() const { return cls.defined() ? cls.value().data[0] : 0.0; }
    double loc_value() const { return loc.defined() ? loc.value().data[0] : 0.0; }
    double saal_value() const { return saal.defined() ? saal.value().data[0] : 0.0; }
    double total_value() const { return total.defined() ? total.value().data[0] : 0.0; }
};

/// alpha * cls + beta * loc + gamma * saal; missing parts count as 0.
Var total_loss(const LossParts& parts, const LossWeights& weights);

/// IoU of two corner boxes (x1,y1,x2,y2); zero when either has non-positive area.
double corner_iou(const Corners& a, const Corners& b);

}  // namespace ssfnet
