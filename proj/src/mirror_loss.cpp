#include "llie/mirror_loss.hpp"

#include <cmath>

#include "llie/ops.hpp"

namespace llie {
namespace ops {

template <typename Scalar>
Var<Scalar> standardize(Var<Scalar> f, Scalar eps) {
  const Tensor<Scalar>& fv = f.value();
  const int groups = fv.batch() * fv.channels();
  const Eigen::Index plane = fv.shape().plane();
  auto rows = [](const Tensor<Scalar>& t, Eigen::Index r) {
    return Eigen::Map<const RowMatrix<Scalar>>(t.data(), r, t.size() / r);
  };
  Tensor<Scalar> out(fv.shape());
  std::vector<Scalar> sigma(groups);
  const auto src = rows(fv, groups);
  Eigen::Map<RowMatrix<Scalar>> dst(out.data(), groups, plane);
  for (int gi = 0; gi < groups; ++gi) {
    const Scalar mean = src.row(gi).mean();
    const auto centered = src.row(gi).array() - mean;
    const Scalar s = std::sqrt(centered.square().mean());
    sigma[gi] = s;
    dst.row(gi) = centered / (s + eps);
  }
  return f.graph->record(std::move(out), {f}, [f, eps, sigma, groups, plane, rows](Graph<Scalar>& g, int self) {
    const auto y = rows(g.value(self), groups);
    const auto gy = rows(g.grad(self), groups);
    Eigen::Map<RowMatrix<Scalar>> df(g.grad(f.id).data(), groups, plane);
    for (int gi = 0; gi < groups; ++gi) {
      const Scalar s = sigma[gi];
      const Scalar denom = s + eps;
      df.row(gi).array() += (gy.row(gi).array() - gy.row(gi).mean()) / denom;
      if (s > Scalar(0)) {
        // y = xhat / denom, so xhat = y * denom.
        const Scalar dsigma = -(gy.row(gi).cwiseProduct(y.row(gi))).sum() / denom;
        df.row(gi).array() += dsigma * y.row(gi).array() * denom / (Scalar(plane) * s);
      }
    }
  });
}

template <typename Scalar>
Var<Scalar> weighted_abs_mean(Var<Scalar> a, Var<Scalar> b, const Tensor<Scalar>& weights) {
  const Tensor<Scalar>& av = a.value();
  const Tensor<Scalar>& bv = b.value();
  require_same_shape(av.shape(), bv.shape(), "weighted_abs_mean");
  if (weights.batch() != av.batch() || weights.channels() != 1 || !weights.shape().same_spatial(av.shape())) {
    throw Error(ErrorCode::ShapeMismatch,
                "weight map " + weights.shape().str() + " does not match features " + av.shape().str());
  }
  const Scalar inv = Scalar(1) / Scalar(av.size());
  Scalar total = 0;
  for (int n = 0; n < av.batch(); ++n) {
    const auto diff = (av.sample(n) - bv.sample(n)).cwiseAbs();
    total += (diff.array().rowwise() * weights.sample(n).array().row(0)).sum();
  }
  Tensor<Scalar> w = weights;
  return a.graph->record(Tensor<Scalar>::scalar(total * inv), {a}, [a, b, w, inv](Graph<Scalar>& g, int self) {
    const Scalar go = g.grad(self).item() * inv;
    const Tensor<Scalar>& av = g.value(a.id);
    const Tensor<Scalar>& bv = g.value(b.id);
    Tensor<Scalar>& da = g.grad(a.id);
    for (int n = 0; n < av.batch(); ++n) {
      const auto sign = (av.sample(n) - bv.sample(n)).array().sign();
      da.sample(n).array() += go * (sign.rowwise() * w.sample(n).array().row(0));
    }
  });
}

}  // namespace ops

std::vector<int> resolve_levels(const LevelSelection& levels, std::size_t depth) {
  std::vector<int> out;
  if (levels.empty()) {
    for (std::size_t i = 0; i < depth; ++i) out.push_back(static_cast<int>(i));
    return out;
  }
  for (int level : levels) {
    if (level < 1 || std::size_t(level) > depth) {
      throw Error(ErrorCode::PyramidDepthMismatch, "mirror level " + std::to_string(level) +
                                                       " outside 1.." + std::to_string(depth));
    }
    out.push_back(level - 1);
  }
  return out;
}

template <typename Scalar>
Var<Scalar> iaml_level(Var<Scalar> student, Var<Scalar> teacher, const Tensor<Scalar>& weights, Scalar eps) {
  require_same_shape(student.shape(), teacher.shape(), "iaml_level");
  const Var<Scalar> s = ops::standardize(student, eps);
  const Var<Scalar> t = ops::standardize(detach(teacher), eps);
  return ops::weighted_abs_mean(s, t, weights);
}

template <typename Scalar>
MirrorTerms<Scalar> iaml_total(const std::vector<Var<Scalar>>& student, const std::vector<Var<Scalar>>& teacher,
                               const WeightMap<Scalar>& weights, Scalar eps, const LevelSelection& levels) {
  if (student.size() != teacher.size() || student.empty()) {
    throw Error(ErrorCode::PyramidDepthMismatch, "student pyramid has " + std::to_string(student.size()) +
                                                     " levels, teacher " + std::to_string(teacher.size()));
  }
  MirrorTerms<Scalar> terms;
  for (int i : resolve_levels(levels, student.size())) {
    const Shape& shape = student[i].shape();
    const WeightMap<Scalar> wi = resize_weights(weights, shape.h, shape.w);
    terms.per_level.push_back(iaml_level(student[i], teacher[i], wi.data, eps));
  }
  terms.total = ops::mean_of(terms.per_level);
  return terms;
}

template <typename Scalar>
Tensor<Scalar> standardize_features(const Tensor<Scalar>& f, Scalar eps) {
  Graph<Scalar> g(false);
  return ops::standardize(g.constant(f), eps).value();
}

template <typename Scalar>
Scalar iaml_level(const Tensor<Scalar>& student, const Tensor<Scalar>& teacher, const Tensor<Scalar>& weights,
                  Scalar eps) {
  Graph<Scalar> g(false);
  return iaml_level(g.constant(student), g.constant(teacher), weights, eps).value().item();
}

template <typename Scalar>
MirrorValue<Scalar> iaml_total(const FeaturePyramid<Scalar>& student, const FeaturePyramid<Scalar>& teacher,
                               const WeightMap<Scalar>& weights, Scalar eps, const LevelSelection& levels) {
  Graph<Scalar> g(false);
  std::vector<Var<Scalar>> s;
  std::vector<Var<Scalar>> t;
  for (const auto& f : student) s.push_back(g.constant(f));
  for (const auto& f : teacher) t.push_back(g.constant(f));
  const MirrorTerms<Scalar> terms = iaml_total(s, t, weights, eps, levels);
  MirrorValue<Scalar> out{terms.total.value().item(), {}};
  for (const auto& v : terms.per_level) out.per_level.push_back(v.value().item());
  return out;
}

#define LLIE_INSTANTIATE_MIRROR(S)                                                                          \
  template Var<S> ops::standardize(Var<S>, S);                                                              \
  template Var<S> ops::weighted_abs_mean(Var<S>, Var<S>, const Tensor<S>&);                                 \
  template Var<S> iaml_level(Var<S>, Var<S>, const Tensor<S>&, S);                                          \
  template MirrorTerms<S> iaml_total(const std::vector<Var<S>>&, const std::vector<Var<S>>&,                \
                                     const WeightMap<S>&, S, const LevelSelection&);                        \
  template Tensor<S> standardize_features(const Tensor<S>&, S);                                             \
  template S iaml_level(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, S);                           \
  template MirrorValue<S> iaml_total(const FeaturePyramid<S>&, const FeaturePyramid<S>&, const WeightMap<S>&, \
                                     S, const LevelSelection&);

LLIE_INSTANTIATE_MIRROR(float)
LLIE_INSTANTIATE_MIRROR(double)

}  // namespace llie
