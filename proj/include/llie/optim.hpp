#pragma once

#include <cstdint>
#include <vector>

#include "llie/autodiff.hpp"

namespace llie {

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First and second moments, one entry per optimized parameter, in the order
/// the parameters are passed to adam_step.
template <typename Scalar>
struct AdamState {
  std::vector<Tensor<Scalar>> m;
  std::vector<Tensor<Scalar>> v;
  std::int64_t t = 0;
};

/// The student weights the optimizer owns. Built only from the student
/// encoder and decoder; the teacher has no way in.
template <typename Scalar>
class OptimizedSet {
 public:
  OptimizedSet(ParameterSet<Scalar>& encoder, ParameterSet<Scalar>& decoder);

  std::size_t size() const { return params_.size(); }
  Parameter<Scalar>& operator[](std::size_t i) { return *params_[i]; }
  /// True if any tensor of `other` is one of the optimized tensors (by address).
  bool contains_any(const ParameterSet<Scalar>& other) const;

 private:
  std::vector<Parameter<Scalar>*> params_;
};

template <typename Scalar>
AdamState<Scalar> make_adam_state(OptimizedSet<Scalar>& params);

/// One bias-corrected Adam update using the gradients currently stored in the
/// parameters. If clip > 0 the global gradient norm is clipped to it first.
template <typename Scalar>
void adam_step(OptimizedSet<Scalar>& params, AdamState<Scalar>& state, double lr, const AdamParams& hyper,
               double clip = 0);

/// 0.5 * lr0 * (1 + cos(pi * epoch / epochs)).
double cosine_lr(double lr0, double epoch, double epochs);

}  // namespace llie
