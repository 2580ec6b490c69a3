#include "llie/autodiff.hpp"

namespace llie {

template <typename Scalar>
Parameter<Scalar>& ParameterSet<Scalar>::add(std::string name, const Shape& shape) {
  if (find(name) != nullptr) {
    throw Error(ErrorCode::InvalidConfig, "duplicate parameter name " + name);
  }
  params_.push_back({std::move(name), Tensor<Scalar>(shape), Tensor<Scalar>(shape)});
  return params_.back();
}

template <typename Scalar>
Parameter<Scalar>* ParameterSet<Scalar>::find(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

template <typename Scalar>
const Parameter<Scalar>* ParameterSet<Scalar>::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

template <typename Scalar>
std::int64_t ParameterSet<Scalar>::count() const {
  std::int64_t total = 0;
  for (const auto& p : params_) total += p.value.size();
  return total;
}

template <typename Scalar>
void ParameterSet<Scalar>::zero_grad() {
  for (auto& p : params_) p.grad.set_zero();
}

template <typename Scalar>
VectorX<Scalar> ParameterSet<Scalar>::flatten() const {
  VectorX<Scalar> flat(count());
  Eigen::Index offset = 0;
  for (const auto& p : params_) {
    flat.segment(offset, p.value.size()) = p.value.array().matrix();
    offset += p.value.size();
  }
  return flat;
}

template <typename Scalar>
VectorX<Scalar> ParameterSet<Scalar>::flatten_grad() const {
  VectorX<Scalar> flat(count());
  Eigen::Index offset = 0;
  for (const auto& p : params_) {
    flat.segment(offset, p.grad.size()) = p.grad.array().matrix();
    offset += p.grad.size();
  }
  return flat;
}

template <typename Scalar>
void ParameterSet<Scalar>::assign(const VectorX<Scalar>& flat) {
  if (flat.size() != count()) {
    throw Error(ErrorCode::ShapeMismatch, "flat weight vector has " + std::to_string(flat.size()) +
                                              " entries, expected " + std::to_string(count()));
  }
  Eigen::Index offset = 0;
  for (auto& p : params_) {
    p.value.array() = flat.segment(offset, p.value.size()).array();
    offset += p.value.size();
  }
}

template <typename Scalar>
bool ParameterSet<Scalar>::same_layout(const ParameterSet& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!(params_[i].value.shape() == other.params_[i].value.shape())) return false;
  }
  return true;
}

template <typename Scalar>
Var<Scalar> Graph<Scalar>::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var<Scalar>{this, static_cast<int>(nodes_.size()) - 1};
}

template <typename Scalar>
Var<Scalar> Graph<Scalar>::constant(Tensor<Scalar> value) {
  return push(Node{std::move(value), {}, false, {}});
}

template <typename Scalar>
Var<Scalar> Graph<Scalar>::leaf(Tensor<Scalar> value) {
  return push(Node{std::move(value), {}, grad_enabled_, {}});
}

template <typename Scalar>
Var<Scalar> Graph<Scalar>::parameter(Parameter<Scalar>& p) {
  if (!grad_enabled_) return constant(p.value);
  Parameter<Scalar>* target = &p;
  return push(Node{p.value, {}, true, [target](Graph& g, int self) {
                     target->grad.array() += g.grad(self).array();
                   }});
}

template <typename Scalar>
Var<Scalar> Graph<Scalar>::record(Tensor<Scalar> value, std::initializer_list<Var<Scalar>> parents,
                                  Backward backward) {
  bool needs = false;
  if (grad_enabled_) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  return push(Node{std::move(value), {}, needs, needs ? std::move(backward) : Backward{}});
}

template <typename Scalar>
Var<Scalar> Graph<Scalar>::record(Tensor<Scalar> value, const std::vector<Var<Scalar>>& parents,
                                  Backward backward) {
  bool needs = false;
  if (grad_enabled_) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  return push(Node{std::move(value), {}, needs, needs ? std::move(backward) : Backward{}});
}

template <typename Scalar>
Tensor<Scalar>& Graph<Scalar>::grad(int id) {
  Node& node = nodes_[id];
  if (node.grad.empty() && !node.value.empty()) node.grad = Tensor<Scalar>(node.value.shape());
  return node.grad;
}

template <typename Scalar>
void Graph<Scalar>::backward(Var<Scalar> root) {
  if (root.value().size() != 1) {
    throw Error(ErrorCode::ShapeMismatch, "backward() needs a scalar root, got " +
                                              root.value().shape().str());
  }
  if (!requires_grad(root.id)) return;
  grad(root.id).array().setOnes();
  for (int id = root.id; id >= 0; --id) {
    Node& node = nodes_[id];
    if (!node.requires_grad || !node.backward || node.grad.empty()) continue;
    node.backward(*this, id);
  }
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template class Graph<float>;
template class Graph<double>;

}  // namespace llie
