#pragma once

#include "llie/tensor.hpp"

namespace llie {

/// Rec. 601 luma coefficients; they sum to one so [0,1] inputs stay in [0,1].
inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

inline constexpr double kDefaultBeta = 0.6;

/// Per-pixel illumination emphasis, one channel, broadcast over feature
/// channels. Values lie in [1, 1 + beta].
template <typename Scalar>
struct WeightMap {
  Tensor<Scalar> data;  // N x 1 x H x W
  Scalar beta = Scalar(kDefaultBeta);
};

/// N x 3 x H x W RGB -> N x 1 x H x W luminance.
template <typename Scalar>
Tensor<Scalar> luminance_map(const Tensor<Scalar>& image);

/// Per-image min-max normalization over spatial positions. A constant image
/// maps to 0.5 everywhere.
template <typename Scalar>
Tensor<Scalar> normalize_luminance(const Tensor<Scalar>& luminance);

/// W = 1 + beta * (1 - L~). Throws NegativeBeta for beta < 0.
template <typename Scalar>
WeightMap<Scalar> emphasis_weights(const Tensor<Scalar>& normalized, Scalar beta = Scalar(kDefaultBeta));

/// Bilinear resampling with half-pixel centers; every output is a convex
/// combination of inputs, so the input range is preserved.
template <typename Scalar>
WeightMap<Scalar> resize_weights(const WeightMap<Scalar>& weights, int target_h, int target_w);

/// luminance_map -> normalize_luminance -> emphasis_weights.
template <typename Scalar>
WeightMap<Scalar> illumination_weights(const Tensor<Scalar>& low_light, Scalar beta = Scalar(kDefaultBeta));

}  // namespace llie
