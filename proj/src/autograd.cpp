#include "ssfnet/autograd.hpp"

#include <unordered_set>

#include "ssfnet/error.hpp"
#include "ssfnet/params.hpp"

namespace ssfnet {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
}

Tensor Var::grad() const {
    if (!node_ || node_->grad.empty()) return Tensor::zeros(node_->value.shape);
    return node_->grad;
}

Var Var::from_node(std::shared_ptr<Node> node) {
    Var v;
    v.node_ = std::move(node);
    return v;
}

Var make_op(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward_fn) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    bool needs = false;
    if (g_grad_enabled) {
        for (const auto& in : inputs) needs = needs || in.requires_grad();
    }
    if (needs) {
        node->requires_grad = true;
        node->parents.reserve(inputs.size());
        for (auto& in : inputs) node->parents.push_back(in.node());
        node->backward = std::move(backward_fn);
    }
    return Var::from_node(std::move(node));
}

void backward(const Var& root) {
    if (root.value().size() != 1) throw ShapeError("backward: root must be a scalar");
    backward(root, Tensor::ones(root.shape()));
}

void backward(const Var& root, const Tensor& seed) {
    if (!root.requires_grad()) return;
    if (!(seed.shape == root.shape())) throw ShapeError("backward: seed shape mismatch");

    // Iterative post-order DFS gives a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    visited.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (Node* n : order) n->grad = Tensor();
    root.node()->grad = seed;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->grad.empty()) continue;
        if (n->backward) n->backward(*n);
        if (n->param != nullptr) {
            Tensor& pg = n->param->grad;
            if (pg.empty()) pg = Tensor::zeros(n->value.shape);
            for (std::size_t i = 0; i < pg.size(); ++i) pg.data[i] += n->grad.data[i];
        }
    }
}

}  // namespace ssfnet
