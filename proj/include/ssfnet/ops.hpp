#pragma once

// Differentiable tensor ops. Every op computes its forward value eagerly and,
// when any input requires a gradient, records an analytic backward closure.
// Layout is NHWC throughout.

#include "ssfnet/autograd.hpp"
#include "ssfnet/params.hpp"

namespace ssfnet::ops {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);

/// x [N,H,W,C] times v [N|1,1,1,C], broadcast over spatial positions (and batch when v.n == 1).
Var mul_channel(const Var& x, const Var& v);
/// x plus per-channel bias b [1,1,1,C].
Var add_bias(const Var& x, const Var& b);
/// x times a trainable scalar s [1,1,1,1].
Var mul_scalar(const Var& x, const Var& s);

Var relu(const Var& x);
Var sigmoid(const Var& x);
/// exp(min(x, cap)); gradient is zero above the cap.
Var exp_capped(const Var& x, double cap);

/// Spatial mean per sample and channel: [N,H,W,C] -> [N,1,1,C].
Var global_avg_pool(const Var& x);
/// Sum over channels: [N,H,W,C] -> [N,H,W,1].
Var channel_sum(const Var& x);
Var sum(const Var& x);
Var mean(const Var& x);

/// 1-D convolution sliding along the channel axis of v [N,1,1,C] with zero
/// padding; w [1,1,1,k] (k odd), b [1,1,1,1].
Var conv1d_channels(const Var& v, const Var& w, const Var& b);

/// Dense 2-D convolution. w [k,k,Cin,Cout]; b [1,1,1,Cout] may be undefined.
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
/// 1x1 convolution, stride 1. w [1,1,Cin,Cout].
Var pointwise(const Var& x, const Var& w, const Var& b);
/// Depth-wise 2-D convolution. w [k,k,1,C].
Var depthwise(const Var& x, const Var& w, int stride, int pad);
/// 3-D convolution treating the channel axis as depth with a single input
/// feature. w [m,3,3,3] (filters, depth, height, width); b [1,1,1,m] may be
/// undefined. Output channel f*C + d holds filter f at depth d; spatial stride
/// applies to height and width only, depth and padding are preserved.
Var spectral_conv3d(const Var& x, const Var& w, const Var& b, int stride);

struct BatchNormState {
    Param* running_mean = nullptr;
    Param* running_var = nullptr;
};

enum class NormMode {
    Batch,    // batch statistics, running statistics updated
    BatchNoUpdate,  // batch statistics, running statistics untouched
    Running,  // running statistics (inference, frozen streams)
};

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BatchNormState state, NormMode mode,
               double momentum = 0.1, double eps = 1e-5);

/// Depth-wise cross-correlation, valid mode, per sample:
/// z [N,hz,wz,C], x [N,hx,wx,C] -> [N,hx-hz+1,wx-wz+1,C].
Var dw_xcorr(const Var& z, const Var& x);

/// Divides each spatial position's channel vector by its L2 norm (sqrt(|v|^2 + eps)).
Var l2_normalize_channels(const Var& x, double eps = 1e-12);

/// Bilinear resize with aligned corners.
Var resize_bilinear(const Var& x, int out_h, int out_w);

Var slice_channels(const Var& x, int c0, int count);

}  // namespace ssfnet::ops
