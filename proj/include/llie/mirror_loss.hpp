#pragma once

#include <vector>

#include "llie/autodiff.hpp"
#include "llie/luminance.hpp"

namespace llie {

inline constexpr double kStandardizeEps = 1e-6;

/// Decoder feature maps, coarse to fine (level 1 first).
template <typename Scalar>
using FeaturePyramid = std::vector<Tensor<Scalar>>;

/// Decoder levels (1-based) that contribute to the mirror loss. Empty means all.
using LevelSelection = std::vector<int>;

/// Per (sample, channel): (f - mean) / (std + eps) over spatial positions,
/// population standard deviation.
template <typename Scalar>
Tensor<Scalar> standardize_features(const Tensor<Scalar>& f, Scalar eps = Scalar(kStandardizeEps));

/// Mean over all elements of W * |std(fS) - std(fT)|, W broadcast over channels.
template <typename Scalar>
Scalar iaml_level(const Tensor<Scalar>& student, const Tensor<Scalar>& teacher,
                  const Tensor<Scalar>& weights, Scalar eps = Scalar(kStandardizeEps));

template <typename Scalar>
struct MirrorValue {
  Scalar total = 0;
  std::vector<Scalar> per_level;
};

/// Resizes W to every selected level and averages the per-level losses.
template <typename Scalar>
MirrorValue<Scalar> iaml_total(const FeaturePyramid<Scalar>& student, const FeaturePyramid<Scalar>& teacher,
                               const WeightMap<Scalar>& weights, Scalar eps = Scalar(kStandardizeEps),
                               const LevelSelection& levels = {});

namespace ops {

template <typename Scalar>
Var<Scalar> standardize(Var<Scalar> f, Scalar eps);

/// mean(W * |a - sg(b)|); no gradient ever reaches b.
template <typename Scalar>
Var<Scalar> weighted_abs_mean(Var<Scalar> a, Var<Scalar> b, const Tensor<Scalar>& weights);

}  // namespace ops

/// Differentiable per-level loss. Gradient flows into `student` only.
template <typename Scalar>
Var<Scalar> iaml_level(Var<Scalar> student, Var<Scalar> teacher, const Tensor<Scalar>& weights,
                       Scalar eps = Scalar(kStandardizeEps));

template <typename Scalar>
struct MirrorTerms {
  Var<Scalar> total;
  std::vector<Var<Scalar>> per_level;
};

template <typename Scalar>
MirrorTerms<Scalar> iaml_total(const std::vector<Var<Scalar>>& student, const std::vector<Var<Scalar>>& teacher,
                               const WeightMap<Scalar>& weights, Scalar eps = Scalar(kStandardizeEps),
                               const LevelSelection& levels = {});

/// Validates a level selection against a pyramid depth and returns the
/// 0-based indices to use.
std::vector<int> resolve_levels(const LevelSelection& levels, std::size_t depth);

}  // namespace llie
