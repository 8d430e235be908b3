#pragma once

// Straightforward reference implementations used to cross-check the optimised
// library code. Written for clarity, not speed.

#include <vector>

#include "ssfnet/data.hpp"
#include "ssfnet/head.hpp"
#include "ssfnet/losses.hpp"
#include "ssfnet/tensor.hpp"

namespace ssfnet::oracle {

/// Direct-loop 2-D convolution with zero padding. w [k,k,Cin,Cout], b may be empty.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad);

/// Direct-loop depthwise cross-correlation, valid mode.
Tensor dw_xcorr(const Tensor& z, const Tensor& x);

struct SafmOut {
    Tensor fused;
    Tensor w_inter0, w_inter1;
};
/// Attention fusion computed element by element with an explicit 2-way softmax.
SafmOut safm(const Tensor& R_f, const Tensor& H_f, const std::vector<double>& intra_w, double intra_b,
             const std::vector<double>& inter_w, double inter_b);

/// Whitened cosine via s^T M^-1 t / sqrt(s^T M^-1 s * t^T M^-1 t), with M inverted
/// by Gauss-Jordan elimination. Requires a full-rank second-moment matrix.
double sam_score(const Tensor& cube, const std::vector<double>& target, int i, int j);

/// Region labels by testing each output point in search-crop pixels against
/// ellipses whose semi-axes are a quarter and half of the crop-space box size.
std::vector<Region> regions(const BoundingBox& crop_box, const MapGeometry& geom);

/// Success curve by an explicit threshold x frame double loop.
std::vector<double> success_curve(const std::vector<double>& ious);
/// Precision curve by an explicit threshold x frame double loop.
std::vector<double> precision_curve(const std::vector<double>& errs);

/// Balanced cross-entropy written with explicit softmax probabilities.
double cls_loss(const Tensor& cls, const std::vector<RegionLabels>& labels);

/// Axis-aligned box overlap from explicit corner arithmetic.
double box_iou(double ax1, double ay1, double ax2, double ay2, double bx1, double by1, double bx2, double by2);

}  // namespace ssfnet::oracle
