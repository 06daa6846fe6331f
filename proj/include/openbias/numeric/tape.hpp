#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "openbias/core/error.hpp"
#include "openbias/numeric/param_store.hpp"
#include "openbias/numeric/tensor.hpp"

namespace openbias::nn {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  inline const Tensor& value() const;
  inline const Tensor& grad() const;
  inline bool requires_grad() const;
  double item() const { return value()[0]; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode tape. One tape per computation, confined to one thread.
/// Only scalar losses are differentiated.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Var constant(Tensor value) { return push(std::move(value), false, {}, "constant"); }

  /// Leaf bound to a store entry; differentiable iff the entry is trainable.
  /// Repeated requests for the same name return the same node.
  Var param(const ParamStore& store, const std::string& name) {
    if (auto it = param_ids_.find(name); it != param_ids_.end()) return Var(this, it->second);
    const auto& entry = store.at(name);
    Var v = push(entry.value, entry.trainable, {}, name.c_str());
    nodes_[v.id()].param_name = name;
    param_ids_.emplace(name, v.id());
    return v;
  }

  /// Records an op result. The node needs gradients iff any parent does.
  Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn backward, const char* op) {
    bool needs = false;
    for (const auto& p : parents) needs = needs || nodes_[p.id()].requires_grad;
    return push(std::move(value), needs, needs ? std::move(backward) : BackwardFn{}, op);
  }

  Var record(Tensor value, const std::vector<Var>& parents, BackwardFn backward, const char* op) {
    bool needs = false;
    for (const auto& p : parents) needs = needs || nodes_[p.id()].requires_grad;
    return push(std::move(value), needs, needs ? std::move(backward) : BackwardFn{}, op);
  }

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Gradient buffer of a node, zero-allocated on first use.
  Tensor& grad(std::size_t id) {
    auto& n = nodes_[id];
    if (n.grad.size() == 0) n.grad = Tensor(n.value.shape());
    return n.grad;
  }
  const Tensor& grad_or_empty(std::size_t id) const { return nodes_[id].grad; }

  std::size_t size() const noexcept { return nodes_.size(); }

  /// Back-propagates from a scalar `loss` and adds parameter gradients into
  /// `store` (trainable entries only). Gradients accumulate across calls.
  void backward(Var loss, ParamStore& store, double seed = 1.0) {
    require(loss.tape() == this, ErrorKind::PreconditionFailed, "loss belongs to another tape");
    require(value(loss.id()).size() == 1, ErrorKind::ShapeMismatch,
            [&] { return "backward needs a scalar loss, got " + shape_string(value(loss.id()).shape()); });
    if (!nodes_[loss.id()].requires_grad) return;
    grad(loss.id())[0] += seed;
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (!n.requires_grad || n.grad.size() == 0) continue;
      if (n.backward) n.backward(*this, i);
    }
    for (const auto& [name, id] : param_ids_) {
      const auto& n = nodes_[id];
      if (!n.requires_grad || n.grad.size() == 0) continue;
      auto& entry = store.at(name);
      if (!entry.trainable) continue;
      auto dst = entry.grad.data();
      auto src = n.grad.data();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
    std::string param_name;
  };

  Var push(Tensor value, bool requires_grad, BackwardFn backward, const char* op) {
    require(value.all_finite(), ErrorKind::NumericalFault,
            [&] { return std::string("non-finite output from ") + op + " " + shape_string(value.shape()); });
    nodes_.push_back(Node{std::move(value), Tensor{}, requires_grad, std::move(backward), {}});
    return Var(this, nodes_.size() - 1);
  }

  std::deque<Node> nodes_;
  std::map<std::string, std::size_t, std::less<>> param_ids_;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }
inline const Tensor& Var::grad() const { return tape_->grad_or_empty(id_); }
inline bool Var::requires_grad() const { return tape_->requires_grad(id_); }

}  // namespace openbias::nn
