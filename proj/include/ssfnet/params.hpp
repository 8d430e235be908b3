#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "ssfnet/autograd.hpp"
#include "ssfnet/tensor.hpp"

namespace ssfnet {

enum class ParamRole {
    Weight,  // trainable, touched by the optimizer unless frozen
    Buffer,  // running statistics; never receives gradients
};

struct Param {
    Tensor value;
    Tensor grad;
    Tensor momentum;
    ParamRole role = ParamRole::Weight;
    bool frozen = false;

    bool trainable() const { return role == ParamRole::Weight && !frozen; }
};

/// Named parameter registry. Names follow `stream.stage{i}.block{j}.{branch}.{param}`
/// and friends; iteration order is lexicographic so checkpoints are deterministic.
class ParamStore {
public:
    Param& add(const std::string& name, Tensor init, ParamRole role = ParamRole::Weight);
    Param& get(const std::string& name);
    const Param& get(const std::string& name) const;
    bool contains(const std::string& name) const { return params_.count(name) != 0; }

    /// Graph leaf bound to the parameter. Requires a gradient iff trainable and
    /// gradients are globally enabled.
    Var use(const std::string& name);

    void zero_grad();
    /// Freezes (or unfreezes) every parameter whose name starts with prefix.
    std::size_t set_frozen(const std::string& prefix, bool frozen);

    std::map<std::string, Param>& items() { return params_; }
    const std::map<std::string, Param>& items() const { return params_; }
    std::size_t size() const { return params_.size(); }
    std::size_t trainable_count() const;

    /// Snapshot of every value, keyed by name.
    std::map<std::string, Tensor> values() const;

private:
    std::map<std::string, Param> params_;
};

/// Named-array checkpoint container.
///
/// Layout (little-endian):
///   8 bytes  magic "SSFNCKPT"
///   u32      version (1)
///   u32      metadata length L, then L bytes of UTF-8 JSON metadata
///   u64      entry count
///   per entry: u32 name length, name bytes, i32 n,h,w,c, f64[n*h*w*c] values
struct Checkpoint {
    std::string metadata;
    std::map<std::string, Tensor> arrays;

    void save(const std::filesystem::path& path) const;
    static Checkpoint load(const std::filesystem::path& path);
};

/// Writes parameter values into the checkpoint, plus optimizer momentum under
/// `optim.momentum.<name>` when include_optimizer is set.
void export_params(const ParamStore& store, Checkpoint& ckpt, bool include_optimizer);

/// Loads parameter values. Without partial, any missing or unexpected model array
/// is an error. Arrays under `optim.` restore momentum buffers.
void import_params(ParamStore& store, const Checkpoint& ckpt, bool partial);

}  // namespace ssfnet
