// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The anchor-asr Authors
 *
 * @file   tape.hpp
 * @brief  Reverse-mode gradient tape.
 *
 * A Tape owns the values produced by differentiable operations (see ops.hpp)
 * in execution order. Each node may carry a backward closure that, given the
 * node's accumulated output gradient, adds into the gradients of its operands.
 * Trainable leaves are registered by name and refer to tensors owned by a
 * ParameterSet, so building a graph never copies model weights.
 */
#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "anchor/numerics/tensor.hpp"

namespace anchor {

/// Named trainable tensors, ordered by name. Also used for gradients.
using ParameterSet = std::map<std::string, Tensor>;

inline ParameterSet zeros_like(const ParameterSet &params) {
  ParameterSet out;
  for (const auto &[name, t] : params) out.emplace(name, Tensor(t.shape()));
  return out;
}

class Var {
 public:
  static constexpr std::uint32_t kInvalid =
      std::numeric_limits<std::uint32_t>::max();

  Var() = default;
  explicit Var(std::uint32_t id) : id_(id) {}

  bool valid() const { return id_ != kInvalid; }
  std::uint32_t id() const { return id_; }

 private:
  std::uint32_t id_ = kInvalid;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape &)>;

  /// With record=false no backward closures are kept (inference).
  explicit Tape(bool record = true) : record_(record) { nodes_.reserve(256); }

  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(Tensor value) {
    Node n;
    n.owned = std::move(value);
    return add_node(std::move(n));
  }

  /// Constant leaf that aliases `value`; the caller keeps it alive.
  Var reference(const Tensor &value) {
    Node n;
    n.external = &value;
    return add_node(std::move(n));
  }

  /// Trainable leaf aliasing `value`. Registering the same name twice
  /// returns the same Var.
  Var parameter(const std::string &name, const Tensor &value) {
    if (auto it = param_index_.find(name); it != param_index_.end())
      return Var(it->second);
    Node n;
    n.external = &value;
    n.requires_grad = record_;
    Var v = add_node(std::move(n));
    param_index_.emplace(name, v.id());
    return v;
  }

  const Tensor &value(Var v) const { return node(v).value(); }
  bool requires_grad(Var v) const { return node(v).requires_grad; }

  /// Gradient reaching `v` in the last backward pass, or nullptr.
  const Tensor *grad(Var v) const {
    const Node &n = node(v);
    return n.grad.empty() ? nullptr : &n.grad;
  }

  /// Mutable gradient slot for `v`, zero-initialized on first access.
  Tensor &grad_slot(Var v) {
    Node &n = nodes_[v.id()];
    if (n.grad.empty()) n.grad = Tensor(n.value().shape());
    return n.grad;
  }

  /// Appends an operation result. `inputs_need_grad` decides whether the
  /// backward closure is kept.
  Var push(Tensor value, bool inputs_need_grad, BackwardFn backward) {
    Node n;
    n.owned = std::move(value);
    n.requires_grad = record_ && inputs_need_grad;
    if (n.requires_grad) n.backward = std::move(backward);
    return add_node(std::move(n));
  }

  /// Seeds d(loss)/d(loss) and runs every recorded closure in reverse.
  void backward(Var loss, double seed = 1.0) {
    require(record_, "backward on a non-recording tape");
    require(value(loss).size() == 1, "backward needs a scalar loss, got " +
                                         shape_str(value(loss).shape()));
    for (auto &n : nodes_) n.grad = Tensor();
    if (!node(loss).requires_grad) return;
    grad_slot(loss)[0] = seed;
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node &n = nodes_[i];
      if (n.backward && !n.grad.empty()) n.backward(*this);
    }
  }

  /// Adds scale * d(loss)/d(param) into `grads` for every registered
  /// parameter. Parameters the loss never touched receive nothing.
  void accumulate_parameter_grads(ParameterSet &grads,
                                  double scale = 1.0) const {
    for (const auto &[name, id] : param_index_) {
      const Tensor &g = nodes_[id].grad;
      if (g.empty()) continue;
      auto it = grads.find(name);
      require(it != grads.end(), "no gradient slot for parameter " + name);
      require(it->second.shape() == g.shape(),
              "gradient shape mismatch for " + name);
      auto dst = it->second.data();
      auto src = g.data();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += scale * src[k];
    }
  }

 private:
  struct Node {
    Tensor owned;
    const Tensor *external = nullptr;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;

    const Tensor &value() const { return external ? *external : owned; }
  };

  const Node &node(Var v) const {
    require(v.valid() && v.id() < nodes_.size(), "invalid tape variable");
    return nodes_[v.id()];
  }

  Var add_node(Node &&n) {
    nodes_.push_back(std::move(n));
    return Var(static_cast<std::uint32_t>(nodes_.size() - 1));
  }

  bool record_;
  std::vector<Node> nodes_;
  std::unordered_map<std::string, std::uint32_t> param_index_;
};

}  // namespace anchor
