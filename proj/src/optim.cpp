#include "llie/optim.hpp"

#include <cmath>
#include <numbers>

namespace llie {

template <typename Scalar>
OptimizedSet<Scalar>::OptimizedSet(ParameterSet<Scalar>& encoder, ParameterSet<Scalar>& decoder) {
  for (auto& p : encoder) params_.push_back(&p);
  for (auto& p : decoder) params_.push_back(&p);
}

template <typename Scalar>
bool OptimizedSet<Scalar>::contains_any(const ParameterSet<Scalar>& other) const {
  for (const auto& q : other) {
    for (const Parameter<Scalar>* p : params_) {
      if (p == &q || p->value.data() == q.value.data()) return true;
    }
  }
  return false;
}

template <typename Scalar>
AdamState<Scalar> make_adam_state(OptimizedSet<Scalar>& params) {
  AdamState<Scalar> state;
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m.emplace_back(params[i].value.shape());
    state.v.emplace_back(params[i].value.shape());
  }
  return state;
}

template <typename Scalar>
void adam_step(OptimizedSet<Scalar>& params, AdamState<Scalar>& state, double lr, const AdamParams& hyper,
               double clip) {
  if (state.m.size() != params.size()) {
    throw Error(ErrorCode::ShapeMismatch, "optimizer state does not match parameter count");
  }
  double scale = 1.0;
  if (clip > 0) {
    double sq = 0;
    for (std::size_t i = 0; i < params.size(); ++i) sq += params[i].grad.array().template cast<double>().square().sum();
    const double norm = std::sqrt(sq);
    if (norm > clip) scale = clip / norm;
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(hyper.beta1, double(state.t));
  const double bc2 = 1.0 - std::pow(hyper.beta2, double(state.t));
  const Scalar b1 = Scalar(hyper.beta1);
  const Scalar b2 = Scalar(hyper.beta2);
  const Scalar step = Scalar(lr / bc1);
  const Scalar inv_bc2 = Scalar(1.0 / bc2);
  const Scalar eps = Scalar(hyper.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    const auto g = p.grad.array() * Scalar(scale);
    auto& m = state.m[i].array();
    auto& v = state.v[i].array();
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.square();
    p.value.array() -= step * m / ((v * inv_bc2).sqrt() + eps);
  }
}

double cosine_lr(double lr0, double epoch, double epochs) {
  if (epochs <= 0) return lr0;
  return 0.5 * lr0 * (1.0 + std::cos(std::numbers::pi * epoch / epochs));
}

#define LLIE_INSTANTIATE_OPTIM(S)                                                                 \
  template class OptimizedSet<S>;                                                                 \
  template AdamState<S> make_adam_state(OptimizedSet<S>&);                                        \
  template void adam_step(OptimizedSet<S>&, AdamState<S>&, double, const AdamParams&, double);

LLIE_INSTANTIATE_OPTIM(float)
LLIE_INSTANTIATE_OPTIM(double)

}  // namespace llie
