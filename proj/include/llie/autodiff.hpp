#pragma once

#include <deque>
#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

#include "llie/tensor.hpp"

namespace llie {

template <typename Scalar>
struct Parameter {
  std::string name;
  Tensor<Scalar> value;
  Tensor<Scalar> grad;
};

/// Ordered, named collection of trainable tensors.
///
/// Ordering is part of the contract: two sets built from the same
/// configuration have identical names, shapes and order, so one flattened
/// weight vector can be loaded into either.
template <typename Scalar>
class ParameterSet {
 public:
  Parameter<Scalar>& add(std::string name, const Shape& shape);

  Parameter<Scalar>& operator[](std::size_t i) { return params_[i]; }
  const Parameter<Scalar>& operator[](std::size_t i) const { return params_[i]; }
  std::size_t size() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  Parameter<Scalar>* find(const std::string& name);
  const Parameter<Scalar>* find(const std::string& name) const;

  /// Total number of scalar weights.
  std::int64_t count() const;
  void zero_grad();
  VectorX<Scalar> flatten() const;
  VectorX<Scalar> flatten_grad() const;
  void assign(const VectorX<Scalar>& flat);
  bool same_layout(const ParameterSet& other) const;

 private:
  std::vector<Parameter<Scalar>> params_;
};

template <typename Scalar>
class Graph;

/// Handle to a node in a Graph.
template <typename Scalar>
struct Var {
  Graph<Scalar>* graph = nullptr;
  int id = -1;

  const Tensor<Scalar>& value() const { return graph->value(id); }
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const { return graph->requires_grad(id); }
};

/// Reverse-mode tape. Nodes are recorded in creation order, which is a
/// topological order, so backward() is a single reverse sweep.
///
/// A graph constructed with `grad_enabled = false` records values only: no
/// node requires grad and no backward closure is stored. Forward passes run
/// on such a graph leave every Parameter::grad untouched.
template <typename Scalar>
class Graph {
 public:
  using Backward = std::function<void(Graph&, int)>;

  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  Var<Scalar> constant(Tensor<Scalar> value);
  /// Differentiable input; its gradient is readable through grad() after backward().
  Var<Scalar> leaf(Tensor<Scalar> value);
  /// Reads p.value; backward() accumulates into p.grad.
  Var<Scalar> parameter(Parameter<Scalar>& p);

  Var<Scalar> record(Tensor<Scalar> value, std::initializer_list<Var<Scalar>> parents,
                     Backward backward);
  Var<Scalar> record(Tensor<Scalar> value, const std::vector<Var<Scalar>>& parents,
                     Backward backward);

  const Tensor<Scalar>& value(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  /// Gradient buffer of a node, zero-allocated on first access.
  Tensor<Scalar>& grad(int id);
  Tensor<Scalar>& grad(Var<Scalar> v) { return grad(v.id); }

  void backward(Var<Scalar> root);
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<Scalar> value;
    Tensor<Scalar> grad;
    bool requires_grad = false;
    Backward backward;
  };

  Var<Scalar> push(Node node);

  bool grad_enabled_;
  std::deque<Node> nodes_;
};

/// Detaches a value from the tape (stop-gradient).
template <typename Scalar>
Var<Scalar> detach(Var<Scalar> v) {
  return v.graph->constant(v.value());
}

}  // namespace llie
