#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ghnforge/core/errors.hpp"
#include "ghnforge/core/tensor.hpp"

namespace ghnforge {

// A named trainable tensor with a persistent gradient buffer. Gradients
// accumulate across tapes within one optimizer step; the trainer zeroes them.
template <class S>
struct Parameter {
  std::string name;
  Tensor<S> value;
  Tensor<S> grad;

  Parameter() = default;
  Parameter(std::string n, Tensor<S> v) : name(std::move(n)), value(std::move(v)) {
    grad = Tensor<S>(value.shape);
  }
};

// Dynamic reverse-mode tape. Nodes are appended in execution order, which is
// a valid topological order, so backward() is a single reverse sweep. Leaf
// nodes either own a constant value or point at an external Parameter whose
// grad buffer receives accumulation directly.
template <class S>
class Tape {
 public:
  using Id = int32_t;
  static constexpr Id kNone = -1;

  Tape() = default;
  // grad_enabled=false gives an inference tape: parameters join as frozen
  // views, no backward closures are built, backward() is an error.
  explicit Tape(bool grad_enabled) : grad_enabled_(grad_enabled) {}

  struct Node {
    Tensor<S> value;                 // unused when external != nullptr
    Tensor<S> grad;                  // ditto
    Parameter<S>* external = nullptr;
    std::function<void(Tape&)> back; // reads own grad, accumulates into parents
    bool needs_grad = false;
    bool grad_touched = false;       // grad buffer allocated/written this pass
  };

  Id constant(Tensor<S> v) { return add_node(std::move(v), false, nullptr); }

  Id input(Tensor<S> v, bool needs_grad) { return add_node(std::move(v), needs_grad, nullptr); }

  Id param(Parameter<S>& p) {
    nodes_.push_back(std::make_unique<Node>());
    Node& n = *nodes_.back();
    n.external = &p;
    n.needs_grad = grad_enabled_;
    return static_cast<Id>(nodes_.size() - 1);
  }

  Id add_node(Tensor<S> value, bool needs_grad, std::function<void(Tape&)> back) {
    nodes_.push_back(std::make_unique<Node>());
    Node& n = *nodes_.back();
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    n.back = std::move(back);
    return static_cast<Id>(nodes_.size() - 1);
  }

  // Ops create the node first so the closure can capture its id.
  void set_back(Id id, std::function<void(Tape&)> back) {
    nodes_[static_cast<size_t>(id)]->back = std::move(back);
  }

  const Tensor<S>& val(Id id) const {
    const Node& n = *nodes_[static_cast<size_t>(id)];
    return n.external ? n.external->value : n.value;
  }

  bool needs_grad(Id id) const { return nodes_[static_cast<size_t>(id)]->needs_grad; }

  // Gradient buffer, allocated lazily. For parameters this is the external
  // persistent buffer; it is NOT cleared here.
  Tensor<S>& grad(Id id) {
    Node& n = *nodes_[static_cast<size_t>(id)];
    n.grad_touched = true;
    if (n.external) return n.external->grad;
    if (n.grad.shape != val(id).shape) n.grad = Tensor<S>(val(id).shape);
    return n.grad;
  }

  // Reverse sweep from `root` (a scalar). Seeds d(root)/d(root) = seed;
  // gradients land in node buffers and external Parameter::grad.
  void backward(Id root, S seed = S(1)) {
    if (!grad_enabled_) throw ShapeMismatch("backward on an inference tape");
    if (val(root).numel() != 1) throw ShapeMismatch("backward root must be a scalar");
    grad(root)[0] += seed;
    for (Id id = root; id >= 0; --id) {
      Node& n = *nodes_[static_cast<size_t>(id)];
      if (!n.needs_grad || !n.grad_touched || !n.back) continue;
      n.back(*this);
    }
  }

  size_t size() const { return nodes_.size(); }
  bool grad_enabled() const { return grad_enabled_; }

 private:
  std::vector<std::unique_ptr<Node>> nodes_;
  bool grad_enabled_ = true;
};

}  // namespace ghnforge
