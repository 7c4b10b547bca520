#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "drunet/tensor.hpp"

namespace drunet {

using NodeId = std::size_t;

/// A trainable tensor that outlives any single tape. Gradients accumulate
/// with += across backward passes until zero_grad() is called.
template <typename T>
struct Parameter {
  Tensor<T> value;
  Tensor<T> grad;

  Parameter() = default;
  explicit Parameter(Tensor<T> v) : value(std::move(v)), grad(value.shape()) {}

  void zero_grad() noexcept { grad.fill(T(0)); }
};

template <typename T>
class Tape;

/// Handle to a node on a tape. Cheap to copy; only valid while its tape lives.
template <typename T>
class Var {
 public:
  Var() = default;

  const Tensor<T>& value() const { return tape_->value(id_); }
  const Tensor<T>& grad() const { return tape_->grad(id_); }
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const { return tape_->requires_grad(id_); }
  NodeId id() const noexcept { return id_; }
  Tape<T>* tape() const noexcept { return tape_; }

 private:
  friend class Tape<T>;
  Var(Tape<T>* tape, NodeId id) : tape_(tape), id_(id) {}

  Tape<T>* tape_ = nullptr;
  NodeId id_ = 0;
};

/// Eager reverse-mode recorder. Each op stores its output and a closure that
/// maps the output gradient onto its inputs. Ops are recorded in execution
/// order, so walking them backwards is a valid topological order.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor<T>& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Tensor<T> value) { return add_node(std::move(value), false, nullptr); }
  Var<T> variable(Tensor<T> value) { return add_node(std::move(value), true, nullptr); }

  /// Leaf bound to an external parameter: reads its value in place and
  /// accumulates directly into Parameter::grad.
  Var<T> parameter(Parameter<T>& p) { return add_node(Tensor<T>{}, true, &p); }

  /// Records the result of an op. The backward closure is kept only when some
  /// input requires a gradient.
  Var<T> record(std::string_view op, Tensor<T> value, std::initializer_list<Var<T>> inputs,
                BackwardFn backward) {
    if (!value.all_finite()) {
      throw NonFiniteError(std::string(op) + ": produced a non-finite value");
    }
    bool needs_grad = false;
    std::vector<NodeId> ids;
    ids.reserve(inputs.size());
    for (const auto& v : inputs) {
      if (v.tape_ != this) throw std::logic_error(std::string(op) + ": input from another tape");
      ids.push_back(v.id_);
      needs_grad = needs_grad || nodes_[v.id_].requires_grad;
    }
    Var<T> out = add_node(std::move(value), needs_grad, nullptr);
    if (needs_grad) {
      ops_.push_back(Op{std::string(op), std::move(ids), out.id_, std::move(backward)});
    }
    return out;
  }

  const Tensor<T>& value(NodeId id) const {
    const Node& n = nodes_.at(id);
    return n.param ? n.param->value : n.value;
  }

  bool requires_grad(NodeId id) const { return nodes_.at(id).requires_grad; }

  /// Gradient buffer for a node, zero-allocated on first access.
  Tensor<T>& grad(NodeId id) {
    Node& n = nodes_.at(id);
    if (n.param) return n.param->grad;
    if (n.grad.empty()) n.grad = Tensor<T>(value(id).shape());
    return n.grad;
  }
  const Tensor<T>& grad(NodeId id) const { return const_cast<Tape*>(this)->grad(id); }

  bool has_grad(NodeId id) const {
    const Node& n = nodes_.at(id);
    return n.param != nullptr || !n.grad.empty();
  }

  /// grad(id) += g, skipped for nodes that do not require a gradient.
  void accumulate(NodeId id, const Tensor<T>& g) {
    if (!requires_grad(id)) return;
    Tensor<T>& dst = grad(id);
    if (dst.shape() != g.shape()) {
      throw ShapeError("gradient shape " + shape_str(g.shape()) + " does not match node shape " +
                       shape_str(dst.shape()));
    }
    T* d = dst.data();
    const T* s = g.data();
    for (std::size_t i = 0, n = dst.numel(); i < n; ++i) d[i] += s[i];
  }

  /// Populates d(loss)/d(node) for every node reachable from `loss`.
  void backward(Var<T> loss) {
    if (nodes_.empty()) throw std::logic_error("backward: empty tape");
    if (backward_done_) throw std::logic_error("backward: tape was already replayed");
    if (loss.value().numel() != 1) {
      throw ShapeError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
    }
    backward_done_ = true;
    if (!requires_grad(loss.id_)) return;
    grad(loss.id_).fill(T(1));
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
      if (!has_grad(it->output)) continue;
      const Tensor<T>& g = grad(it->output);
      it->backward(*this, g);
    }
  }

  std::size_t node_count() const noexcept { return nodes_.size(); }
  /// Id the next recorded node will receive; lets a backward rule refer to
  /// its own op's output.
  NodeId next_id() const noexcept { return nodes_.size(); }
  std::size_t op_count() const noexcept { return ops_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    Parameter<T>* param = nullptr;
  };
  struct Op {
    std::string name;
    std::vector<NodeId> inputs;
    NodeId output;
    BackwardFn backward;
  };

  Var<T> add_node(Tensor<T> value, bool requires_grad, Parameter<T>* param) {
    nodes_.push_back(Node{std::move(value), Tensor<T>{}, requires_grad, param});
    return Var<T>(this, nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
  std::vector<Op> ops_;
  bool backward_done_ = false;
};

template <typename T>
void zero_grads(std::span<Parameter<T>* const> params) {
  for (auto* p : params) p->zero_grad();
}

// Elementwise arithmetic. `b` may be a single-element tensor, in which case
// it is broadcast over `a`.
template <typename T> Var<T> add(Var<T> a, Var<T> b);
template <typename T> Var<T> sub(Var<T> a, Var<T> b);
template <typename T> Var<T> mul(Var<T> a, Var<T> b);
template <typename T> Var<T> div(Var<T> a, Var<T> b);
template <typename T> Var<T> add_scalar(Var<T> a, T s);
template <typename T> Var<T> mul_scalar(Var<T> a, T s);

/// Sums over `axes`, removing them from the shape. Reducing every axis
/// yields shape {1}. An empty axis list also means "all axes".
template <typename T> Var<T> reduce_sum(Var<T> a, std::vector<int> axes);
template <typename T> Var<T> sum(Var<T> a) { return reduce_sum(a, {}); }

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace drunet
