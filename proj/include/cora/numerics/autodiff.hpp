// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode automatic differentiation over Tensor values.
//
// Every operation returns a Var that owns its value and, when any input
// requires a gradient, a closure that pushes the incoming gradient back to its
// inputs. Graphs are built per forward pass and released when the last Var
// referencing them goes away. Parameter leaves accumulate gradients across
// backward calls until zero_grad().
//
// A graph must only be touched from one thread. Inference in parallel is fine
// under NoGradGuard because results then hold no references to their inputs.

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cora/error.hpp"
#include "cora/numerics/tensor.hpp"

namespace cora {

namespace detail {

struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    // Gradient buffer of the node, created as zeros on first use.
    Tensor& grad_buffer() {
        if (grad.shape() != value.shape()) {
            grad = Tensor(value.shape());
        }
        return grad;
    }
};

inline bool& grad_mode() {
    thread_local bool enabled = true;
    return enabled;
}

} // namespace detail

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard() : previous_(detail::grad_mode()) { detail::grad_mode() = false; }
    ~NoGradGuard() { detail::grad_mode() = previous_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

inline bool grad_enabled() noexcept { return detail::grad_mode(); }

class Var {
public:
    Var() = default;

    static Var constant(Tensor value) { return Var(std::move(value), false); }
    static Var parameter(Tensor value) { return Var(std::move(value), true); }

    bool defined() const noexcept { return static_cast<bool>(node_); }

    const Tensor& value() const { return node_->value; }
    // Direct write access for optimizers, initializers and checkpoint loading.
    Tensor& mutable_value() { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }

    bool requires_grad() const noexcept { return node_ && node_->requires_grad; }
    void set_requires_grad(bool flag) { node_->requires_grad = flag; }

    // Gradient with the value's shape; zeros if nothing has flowed in yet.
    const Tensor& grad() const { return node_->grad_buffer(); }
    Tensor& mutable_grad() { return node_->grad_buffer(); }
    bool has_grad() const noexcept { return node_ && node_->grad.shape() == node_->value.shape(); }

    void zero_grad() {
        if (has_grad()) {
            node_->grad.fill(0.0);
        }
    }

    /// Back-propagates from this scalar (size-1) output with seed 1.
    void backward() {
        if (node_->value.size() != 1) {
            throw DimensionError("backward: output must be a scalar, got " + shape_string(shape()));
        }
        backward(Tensor(node_->value.shape(), 1.0));
    }

    void backward(const Tensor& seed) {
        if (!node_->requires_grad) {
            return;
        }
        if (seed.shape() != node_->value.shape()) {
            throw DimensionError("backward: seed shape " + shape_string(seed.shape()) + " vs " +
                                 shape_string(shape()));
        }
        const auto order = topological_order();
        // Interior gradients start fresh each pass; leaves keep accumulating.
        for (detail::Node* n : order) {
            if (n->backward) {
                n->grad = Tensor(n->value.shape());
            }
        }
        Tensor& root = node_->grad_buffer();
        for (std::size_t i = 0; i < root.size(); ++i) {
            root[i] += seed[i];
        }
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            detail::Node* n = *it;
            if (n->backward) {
                n->backward(*n);
            }
        }
    }

    const std::shared_ptr<detail::Node>& node() const noexcept { return node_; }

    static Var from_node(std::shared_ptr<detail::Node> node) {
        Var v;
        v.node_ = std::move(node);
        return v;
    }

private:
    Var(Tensor value, bool requires_grad) : node_(std::make_shared<detail::Node>()) {
        node_->value = std::move(value);
        node_->requires_grad = requires_grad;
    }

    // Post-order over nodes that require gradients.
    std::vector<detail::Node*> topological_order() const {
        std::vector<detail::Node*> order;
        std::unordered_set<const detail::Node*> seen;
        std::vector<std::pair<detail::Node*, std::size_t>> stack;
        stack.emplace_back(node_.get(), 0);
        seen.insert(node_.get());
        while (!stack.empty()) {
            auto& [n, next] = stack.back();
            if (next < n->parents.size()) {
                detail::Node* p = n->parents[next++].get();
                if (p->requires_grad && seen.insert(p).second) {
                    stack.emplace_back(p, 0);
                }
                continue;
            }
            order.push_back(n);
            stack.pop_back();
        }
        return order;
    }

    std::shared_ptr<detail::Node> node_;
};

namespace detail {

#ifndef NDEBUG
inline void check_finite(const Tensor& t, const char* op) {
    if (!t.all_finite()) {
        throw NumericError(std::string(op) + ": non-finite value produced");
    }
}
#else
inline void check_finite(const Tensor&, const char*) {}
#endif

/// Wraps an op result. `backward` receives the result node and must add its
/// gradient contribution into each parent that requires a gradient.
inline Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward,
                       const char* op) {
    check_finite(value, op);
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    bool needs = false;
    if (grad_enabled()) {
        for (const Var& in : inputs) {
            needs = needs || in.requires_grad();
        }
    }
    if (needs) {
        node->requires_grad = true;
        node->parents.reserve(inputs.size());
        for (const Var& in : inputs) {
            node->parents.push_back(in.node());
        }
        node->backward = std::move(backward);
    }
    return Var::from_node(std::move(node));
}

inline Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

} // namespace detail

} // namespace cora
