#pragma once

// Minimal reverse-mode differentiation over Tensor values. A Var is a handle to
// a graph node; ops in ops.hpp build nodes and attach a backward closure only
// when at least one input requires a gradient.

#include <functional>
#include <memory>
#include <vector>

#include "ssfnet/tensor.hpp"

namespace ssfnet {

struct Param;

struct Node {
    Tensor value;
    Tensor grad;  // lazily allocated, same shape as value
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;
    Param* param = nullptr;  // leaf bound to a parameter; grad is flushed into it

    Tensor& grad_buffer() {
        if (grad.empty()) grad = Tensor::zeros(value.shape);
        return grad;
    }
};

class Var {
public:
    Var() = default;
    explicit Var(Tensor value, bool requires_grad = false);

    const Tensor& value() const { return node_->value; }
    const Shape& shape() const { return node_->value.shape; }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    /// Gradient accumulated by the last backward pass (zeros if none reached).
    Tensor grad() const;
    bool defined() const { return static_cast<bool>(node_); }

    const std::shared_ptr<Node>& node() const { return node_; }
    static Var from_node(std::shared_ptr<Node> node);

private:
    std::shared_ptr<Node> node_;
};

/// Creates an op node; the closure receives the output node (with its grad filled)
/// and must accumulate into the parents' grad buffers.
Var make_op(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward);

/// Seeds d(root)/d(root) = 1 (root must be a scalar unless a seed is given) and
/// propagates to every reachable node requiring a gradient.
void backward(const Var& root);
void backward(const Var& root, const Tensor& seed);

/// Global switch consulted by make_op; inference runs with gradients disabled.
bool grad_enabled();

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

}  // namespace ssfnet
