#pragma once

// Parameter-registration and forward helpers shared by the network modules.

#include <cmath>
#include <random>
#include <string>

#include "ssfnet/model_config.hpp"
#include "ssfnet/ops.hpp"
#include "ssfnet/params.hpp"

namespace ssfnet::layers {

inline Tensor he_normal(Shape s, int fan_in, std::mt19937_64& rng, double gain = 1.0) {
    return Tensor::randn(s, rng, gain * std::sqrt(2.0 / static_cast<double>(fan_in)));
}

/// k x k dense conv: `<prefix>.weight` [k,k,cin,cout], `<prefix>.bias` [1,1,1,cout].
inline void add_conv(ParamStore& store, const std::string& prefix, int k, int cin, int cout, std::mt19937_64& rng,
                     double gain = 1.0) {
    store.add(prefix + ".weight", he_normal(Shape{k, k, cin, cout}, k * k * cin, rng, gain));
    store.add(prefix + ".bias", Tensor::zeros(Shape{1, 1, 1, cout}));
}

inline Var conv(ParamStore& store, const std::string& prefix, const Var& x, int stride = 1) {
    const Var w = store.use(prefix + ".weight");
    const int k = w.shape().n;
    return ops::conv2d(x, w, store.use(prefix + ".bias"), stride, k / 2);
}

inline void add_bn(ParamStore& store, const std::string& prefix, int channels) {
    store.add(prefix + ".gamma", Tensor::ones(Shape{1, 1, 1, channels}));
    store.add(prefix + ".beta", Tensor::zeros(Shape{1, 1, 1, channels}));
    store.add(prefix + ".running_mean", Tensor::zeros(Shape{1, 1, 1, channels}), ParamRole::Buffer);
    store.add(prefix + ".running_var", Tensor::ones(Shape{1, 1, 1, channels}), ParamRole::Buffer);
}

inline Var bn(ParamStore& store, const std::string& prefix, const Var& x, const RunMode& mode) {
    ops::BatchNormState state{&store.get(prefix + ".running_mean"), &store.get(prefix + ".running_var")};
    return ops::batch_norm(x, store.use(prefix + ".gamma"), store.use(prefix + ".beta"), state, mode.norm,
                           mode.bn_momentum);
}

inline Var act(const Var& x, const RunMode& mode) { return mode.identity_activations ? x : ops::relu(x); }

}  // namespace ssfnet::layers
