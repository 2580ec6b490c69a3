#pragma once

#include <vector>

#include "llie/autodiff.hpp"

/// Differentiable tensor primitives recorded on a Graph.
namespace llie::ops {

/// Stride-1 2-D convolution. weight: Cout x Cin x k x k, bias: 1 x Cout x 1 x 1.
template <typename Scalar>
Var<Scalar> conv2d(Var<Scalar> x, Var<Scalar> weight, Var<Scalar> bias, int pad);

/// 2x2 stride-2 transposed convolution. weight: Cin x Cout x 2 x 2.
template <typename Scalar>
Var<Scalar> conv_transpose2x2(Var<Scalar> x, Var<Scalar> weight, Var<Scalar> bias);

template <typename Scalar>
Var<Scalar> leaky_relu(Var<Scalar> x, Scalar slope);
template <typename Scalar>
Var<Scalar> relu(Var<Scalar> x);
template <typename Scalar>
Var<Scalar> sigmoid(Var<Scalar> x);

template <typename Scalar>
Var<Scalar> avg_pool2(Var<Scalar> x);

/// Channel concatenation [a, b].
template <typename Scalar>
Var<Scalar> concat_channels(Var<Scalar> a, Var<Scalar> b);

template <typename Scalar>
Var<Scalar> add(Var<Scalar> a, Var<Scalar> b);
/// a * x + b, elementwise.
template <typename Scalar>
Var<Scalar> affine(Var<Scalar> x, Scalar a, Scalar b);

/// x (N,C,H,W) scaled by gate (N,C,1,1).
template <typename Scalar>
Var<Scalar> mul_channel(Var<Scalar> x, Var<Scalar> gate);
/// x (N,C,H,W) scaled by gate (N,1,H,W).
template <typename Scalar>
Var<Scalar> mul_spatial(Var<Scalar> x, Var<Scalar> gate);

/// (N,C,H,W) -> (N,C,1,1).
template <typename Scalar>
Var<Scalar> global_avg_pool(Var<Scalar> x);
template <typename Scalar>
Var<Scalar> global_max_pool(Var<Scalar> x);
/// (N,C,H,W) -> (N,1,H,W).
template <typename Scalar>
Var<Scalar> channel_mean(Var<Scalar> x);
template <typename Scalar>
Var<Scalar> channel_max(Var<Scalar> x);

/// Arithmetic mean of scalar nodes.
template <typename Scalar>
Var<Scalar> mean_of(const std::vector<Var<Scalar>>& scalars);

/// Mean of (a - b)^2 over all elements.
template <typename Scalar>
Var<Scalar> mse(Var<Scalar> a, Var<Scalar> b);

}  // namespace llie::ops
