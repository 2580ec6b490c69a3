#include "llie/losses.hpp"

#include <algorithm>
#include <cmath>

#include "llie/ops.hpp"

namespace llie {

std::string_view to_string(ConfigTag tag) {
  switch (tag) {
    case ConfigTag::MseOnly: return "mse_only";
    case ConfigTag::MseSsim: return "mse_ssim";
    case ConfigTag::MseSsimCos: return "mse_ssim_cos";
    case ConfigTag::MseSsimStdL1: return "mse_ssim_stdl1";
    case ConfigTag::MseSsimIaml: return "mse_ssim_iaml";
  }
  return "?";
}

std::string_view display_name(ConfigTag tag) {
  switch (tag) {
    case ConfigTag::MseOnly: return "MSE only";
    case ConfigTag::MseSsim: return "MSE + SSIM";
    case ConfigTag::MseSsimCos: return "MSE + SSIM + Cos. Sim.";
    case ConfigTag::MseSsimStdL1: return "MSE + SSIM + Std. l1";
    case ConfigTag::MseSsimIaml: return "MSE + SSIM + IAML";
  }
  return "?";
}

ConfigTag parse_config_tag(std::string_view text) {
  for (ConfigTag tag : kAllConfigTags) {
    if (to_string(tag) == text) return tag;
  }
  throw Error(ErrorCode::UnknownConfigTag, "unknown loss configuration '" + std::string(text) + "'");
}

bool uses_ssim(ConfigTag tag) { return tag != ConfigTag::MseOnly; }

bool uses_mirror(ConfigTag tag) {
  return tag == ConfigTag::MseSsimCos || tag == ConfigTag::MseSsimStdL1 || tag == ConfigTag::MseSsimIaml;
}

void SsimParams::validate() const {
  if (window_size < 1 || window_size % 2 == 0) {
    throw Error(ErrorCode::RangeError, "loss.ssim.window must be a positive odd integer");
  }
  if (!(gaussian_sigma > 0)) throw Error(ErrorCode::RangeError, "loss.ssim.sigma must be positive");
  if (!(dynamic_range > 0)) throw Error(ErrorCode::RangeError, "SSIM dynamic range must be positive");
}

double LossBreakdown::recombined(double lambda) const {
  double t = mse;
  if (uses_ssim(tag)) t += ssim_loss;
  if (uses_mirror(tag)) t += lambda * mirror;
  return t;
}

std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> taps(size);
  const double center = (size - 1) / 2.0;
  double sum = 0;
  for (int i = 0; i < size; ++i) {
    taps[i] = std::exp(-((i - center) * (i - center)) / (2 * sigma * sigma));
    sum += taps[i];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

namespace {

/// Separable Gaussian filter restricted to fully-covered ("valid") positions.
template <typename Scalar>
class ValidGaussian {
 public:
  ValidGaussian(const SsimParams& params, int h, int w)
      : h_(h), w_(w), ho_(h - params.window_size + 1), wo_(w - params.window_size + 1) {
    for (double t : gaussian_window(params.window_size, params.gaussian_sigma)) taps_.push_back(Scalar(t));
  }

  int out_h() const { return ho_; }
  int out_w() const { return wo_; }

  template <typename Plane>
  RowMatrix<Scalar> apply(const Plane& p) const {
    RowMatrix<Scalar> tmp = RowMatrix<Scalar>::Zero(h_, wo_);
    for (std::size_t k = 0; k < taps_.size(); ++k) tmp += taps_[k] * p.middleCols(k, wo_);
    RowMatrix<Scalar> out = RowMatrix<Scalar>::Zero(ho_, wo_);
    for (std::size_t k = 0; k < taps_.size(); ++k) out += taps_[k] * tmp.middleRows(k, ho_);
    return out;
  }

  RowMatrix<Scalar> adjoint(const RowMatrix<Scalar>& g) const {
    RowMatrix<Scalar> tmp = RowMatrix<Scalar>::Zero(h_, wo_);
    for (std::size_t k = 0; k < taps_.size(); ++k) tmp.middleRows(k, ho_) += taps_[k] * g;
    RowMatrix<Scalar> out = RowMatrix<Scalar>::Zero(h_, w_);
    for (std::size_t k = 0; k < taps_.size(); ++k) out.middleCols(k, wo_) += taps_[k] * tmp;
    return out;
  }

 private:
  int h_;
  int w_;
  int ho_;
  int wo_;
  std::vector<Scalar> taps_;
};

template <typename Scalar>
struct SsimPlane {
  RowMatrix<Scalar> mx, my, a1, a2, b1, b2, s;
};

template <typename Scalar, typename Plane>
SsimPlane<Scalar> ssim_plane(const ValidGaussian<Scalar>& filter, const Plane& x, const Plane& y, Scalar c1,
                             Scalar c2) {
  SsimPlane<Scalar> m;
  m.mx = filter.apply(x);
  m.my = filter.apply(y);
  const RowMatrix<Scalar> exx = filter.apply(x.cwiseProduct(x));
  const RowMatrix<Scalar> eyy = filter.apply(y.cwiseProduct(y));
  const RowMatrix<Scalar> exy = filter.apply(x.cwiseProduct(y));
  const auto mxa = m.mx.array();
  const auto mya = m.my.array();
  m.a1 = (Scalar(2) * mxa * mya + c1).matrix();
  m.a2 = (Scalar(2) * (exy.array() - mxa * mya) + c2).matrix();
  m.b1 = (mxa.square() + mya.square() + c1).matrix();
  m.b2 = ((exx.array() - mxa.square()) + (eyy.array() - mya.square()) + c2).matrix();
  m.s = (m.a1.array() * m.a2.array() / (m.b1.array() * m.b2.array())).matrix();
  return m;
}

void check_ssim_inputs(const Shape& x, const Shape& y, const SsimParams& params) {
  require_same_shape(x, y, "ssim_index");
  params.validate();
  if (x.h < params.window_size || x.w < params.window_size) {
    throw Error(ErrorCode::ImageTooSmall, "image " + x.str() + " smaller than SSIM window " +
                                              std::to_string(params.window_size));
  }
}

}  // namespace

namespace ops {

template <typename Scalar>
Var<Scalar> ssim_index(Var<Scalar> x, Var<Scalar> y, const SsimParams& params) {
  const Tensor<Scalar>& xv = x.value();
  const Tensor<Scalar>& yv = y.value();
  check_ssim_inputs(xv.shape(), yv.shape(), params);
  const ValidGaussian<Scalar> filter(params, xv.height(), xv.width());
  const Scalar c1 = Scalar(params.c1());
  const Scalar c2 = Scalar(params.c2());
  const Scalar count = Scalar(xv.batch()) * xv.channels() * filter.out_h() * filter.out_w();
  Scalar total = 0;
  for (int n = 0; n < xv.batch(); ++n)
    for (int c = 0; c < xv.channels(); ++c) total += ssim_plane(filter, xv.plane(n, c), yv.plane(n, c), c1, c2).s.sum();

  return x.graph->record(
      Tensor<Scalar>::scalar(total / count), {x, y}, [x, y, filter, c1, c2, count](Graph<Scalar>& g, int self) {
        const Scalar ds = g.grad(self).item() / count;
        const Tensor<Scalar>& xv = g.value(x.id);
        const Tensor<Scalar>& yv = g.value(y.id);
        for (int n = 0; n < xv.batch(); ++n)
          for (int c = 0; c < xv.channels(); ++c) {
            const auto xp = xv.plane(n, c);
            const auto yp = yv.plane(n, c);
            const SsimPlane<Scalar> m = ssim_plane(filter, xp, yp, c1, c2);
            const auto denom = m.b1.array() * m.b2.array();
            const auto da1 = ds * m.a2.array() / denom;
            const auto da2 = ds * m.a1.array() / denom;
            const auto db1 = -ds * m.s.array() / m.b1.array();
            const auto db2 = -ds * m.s.array() / m.b2.array();
            const RowMatrix<Scalar> g_cross = filter.adjoint((Scalar(2) * da2).matrix());
            const RowMatrix<Scalar> g_square = filter.adjoint(db2.matrix());
            if (x.requires_grad()) {
              const RowMatrix<Scalar> g_mean = filter.adjoint(
                  (Scalar(2) * (m.my.array() * (da1 - da2) + m.mx.array() * (db1 - db2))).matrix());
              g.grad(x.id).plane(n, c) += g_mean + (Scalar(2) * xp.array() * g_square.array()).matrix() +
                                          yp.cwiseProduct(g_cross);
            }
            if (y.requires_grad()) {
              const RowMatrix<Scalar> g_mean = filter.adjoint(
                  (Scalar(2) * (m.mx.array() * (da1 - da2) + m.my.array() * (db1 - db2))).matrix());
              g.grad(y.id).plane(n, c) += g_mean + (Scalar(2) * yp.array() * g_square.array()).matrix() +
                                          xp.cwiseProduct(g_cross);
            }
          }
      });
}

template <typename Scalar>
Var<Scalar> cosine_distance(Var<Scalar> a, Var<Scalar> b) {
  const Tensor<Scalar>& av = a.value();
  const Tensor<Scalar>& bv = b.value();
  require_same_shape(av.shape(), bv.shape(), "cosine_distance");
  constexpr Scalar kEps = Scalar(1e-8);
  const Scalar count = Scalar(av.batch()) * Scalar(av.shape().plane());
  Scalar sum_cos = 0;
  for (int n = 0; n < av.batch(); ++n) {
    const auto A = av.sample(n).array();
    const auto B = bv.sample(n).array();
    const auto dot = (A * B).colwise().sum();
    const auto na = av.sample(n).colwise().norm().array().max(kEps);
    const auto nb = bv.sample(n).colwise().norm().array().max(kEps);
    sum_cos += (dot / (na * nb)).sum();
  }
  return a.graph->record(Tensor<Scalar>::scalar(Scalar(1) - sum_cos / count), {a},
                         [a, b, count, kEps](Graph<Scalar>& g, int self) {
                           const Scalar go = -g.grad(self).item() / count;
                           const Tensor<Scalar>& av = g.value(a.id);
                           const Tensor<Scalar>& bv = g.value(b.id);
                           Tensor<Scalar>& da = g.grad(a.id);
                           for (int n = 0; n < av.batch(); ++n) {
                             const auto A = av.sample(n);
                             const auto B = bv.sample(n);
                             for (Eigen::Index p = 0; p < A.cols(); ++p) {
                               const Scalar na = A.col(p).norm();
                               const Scalar ma = std::max(na, kEps);
                               const Scalar mb = std::max(B.col(p).norm(), kEps);
                               const Scalar dot = A.col(p).dot(B.col(p));
                               auto col = da.sample(n).col(p);
                               col += (go / (ma * mb)) * B.col(p);
                               if (na > kEps) col -= (go * dot / (ma * ma * mb * na)) * A.col(p);
                             }
                           }
                         });
}

}  // namespace ops

template <typename Scalar>
Var<Scalar> ssim_loss(Var<Scalar> x, Var<Scalar> y, const SsimParams& params) {
  return ops::affine(ops::ssim_index(x, y, params), Scalar(-1), Scalar(1));
}

template <typename Scalar>
Var<Scalar> cosine_mirror_loss(const std::vector<Var<Scalar>>& student, const std::vector<Var<Scalar>>& teacher,
                               const LevelSelection& levels) {
  if (student.size() != teacher.size() || student.empty()) {
    throw Error(ErrorCode::PyramidDepthMismatch, "cosine_mirror_loss: pyramid depth mismatch");
  }
  std::vector<Var<Scalar>> per_level;
  for (int i : resolve_levels(levels, student.size())) {
    per_level.push_back(ops::cosine_distance(student[i], detach(teacher[i])));
  }
  return ops::mean_of(per_level);
}

template <typename Scalar>
MirrorTerms<Scalar> standardized_l1_terms(const std::vector<Var<Scalar>>& student,
                                          const std::vector<Var<Scalar>>& teacher, Scalar eps,
                                          const LevelSelection& levels) {
  if (student.empty()) throw Error(ErrorCode::PyramidDepthMismatch, "empty pyramid");
  const Shape& fine = student.back().shape();
  WeightMap<Scalar> ones{Tensor<Scalar>::constant({fine.n, 1, fine.h, fine.w}, Scalar(1)), Scalar(0)};
  return iaml_total(student, teacher, ones, eps, levels);
}

template <typename Scalar>
TotalLoss<Scalar> total_loss(Var<Scalar> pred, Var<Scalar> target, const std::vector<Var<Scalar>>& student_pyramid,
                             const std::vector<Var<Scalar>>& teacher_pyramid, const WeightMap<Scalar>& weights,
                             const LossConfig& config) {
  if (!(config.lambda >= 0)) throw Error(ErrorCode::RangeError, "loss.lambda must be non-negative");
  TotalLoss<Scalar> out;
  LossBreakdown& b = out.breakdown;
  b.tag = config.tag;

  const Var<Scalar> mse = ops::mse(pred, target);
  b.mse = mse.value().item();
  Var<Scalar> total = mse;

  const Shape& shape = pred.shape();
  if (uses_ssim(config.tag)) {
    const Var<Scalar> sl = ssim_loss(pred, target, config.ssim);
    b.ssim_loss = sl.value().item();
    total = ops::add(total, sl);
  } else if (shape.h >= config.ssim.window_size && shape.w >= config.ssim.window_size) {
    b.ssim_loss = 1.0 - double(ssim_index(pred.value(), target.value(), config.ssim));
  }

  if (uses_mirror(config.tag)) {
    Var<Scalar> mirror;
    const Scalar eps = Scalar(config.eps);
    switch (config.tag) {
      case ConfigTag::MseSsimCos:
        mirror = cosine_mirror_loss(student_pyramid, teacher_pyramid, config.levels);
        break;
      case ConfigTag::MseSsimStdL1: {
        const MirrorTerms<Scalar> terms = standardized_l1_terms(student_pyramid, teacher_pyramid, eps, config.levels);
        for (const auto& v : terms.per_level) b.mirror_per_level.push_back(v.value().item());
        mirror = terms.total;
        break;
      }
      default: {
        const MirrorTerms<Scalar> terms = iaml_total(student_pyramid, teacher_pyramid, weights, eps, config.levels);
        for (const auto& v : terms.per_level) b.mirror_per_level.push_back(v.value().item());
        mirror = terms.total;
        break;
      }
    }
    b.mirror = mirror.value().item();
    total = ops::add(total, ops::affine(mirror, Scalar(config.lambda), Scalar(0)));
  }
  b.total = total.value().item();
  out.total = total;
  return out;
}

template <typename Scalar>
Scalar ssim_index(const Tensor<Scalar>& x, const Tensor<Scalar>& y, const SsimParams& params) {
  Graph<Scalar> g(false);
  return ops::ssim_index(g.constant(x), g.constant(y), params).value().item();
}

template <typename Scalar>
Scalar mse_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target) {
  Graph<Scalar> g(false);
  return ops::mse(g.constant(pred), g.constant(target)).value().item();
}

template <typename Scalar>
Scalar ssim_loss(const Tensor<Scalar>& x, const Tensor<Scalar>& y, const SsimParams& params) {
  return Scalar(1) - ssim_index(x, y, params);
}

template <typename Scalar>
Scalar cosine_mirror_loss(const FeaturePyramid<Scalar>& student, const FeaturePyramid<Scalar>& teacher,
                          const LevelSelection& levels) {
  Graph<Scalar> g(false);
  std::vector<Var<Scalar>> s;
  std::vector<Var<Scalar>> t;
  for (const auto& f : student) s.push_back(g.constant(f));
  for (const auto& f : teacher) t.push_back(g.constant(f));
  return cosine_mirror_loss(s, t, levels).value().item();
}

template <typename Scalar>
Scalar standardized_l1_loss(const FeaturePyramid<Scalar>& student, const FeaturePyramid<Scalar>& teacher, Scalar eps,
                            const LevelSelection& levels) {
  Graph<Scalar> g(false);
  std::vector<Var<Scalar>> s;
  std::vector<Var<Scalar>> t;
  for (const auto& f : student) s.push_back(g.constant(f));
  for (const auto& f : teacher) t.push_back(g.constant(f));
  return standardized_l1_terms(s, t, eps, levels).total.value().item();
}

#define LLIE_INSTANTIATE_LOSSES(S)                                                                               \
  template Var<S> ops::ssim_index(Var<S>, Var<S>, const SsimParams&);                                             \
  template Var<S> ops::cosine_distance(Var<S>, Var<S>);                                                           \
  template Var<S> ssim_loss(Var<S>, Var<S>, const SsimParams&);                                                   \
  template Var<S> cosine_mirror_loss(const std::vector<Var<S>>&, const std::vector<Var<S>>&, const LevelSelection&); \
  template MirrorTerms<S> standardized_l1_terms(const std::vector<Var<S>>&, const std::vector<Var<S>>&, S,        \
                                                const LevelSelection&);                                           \
  template TotalLoss<S> total_loss(Var<S>, Var<S>, const std::vector<Var<S>>&, const std::vector<Var<S>>&,        \
                                   const WeightMap<S>&, const LossConfig&);                                       \
  template S ssim_index(const Tensor<S>&, const Tensor<S>&, const SsimParams&);                                   \
  template S mse_loss(const Tensor<S>&, const Tensor<S>&);                                                        \
  template S ssim_loss(const Tensor<S>&, const Tensor<S>&, const SsimParams&);                                    \
  template S cosine_mirror_loss(const FeaturePyramid<S>&, const FeaturePyramid<S>&, const LevelSelection&);       \
  template S standardized_l1_loss(const FeaturePyramid<S>&, const FeaturePyramid<S>&, S, const LevelSelection&);

LLIE_INSTANTIATE_LOSSES(float)
LLIE_INSTANTIATE_LOSSES(double)

}  // namespace llie
