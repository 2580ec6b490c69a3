#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "llie/autodiff.hpp"
#include "llie/mirror_loss.hpp"

namespace llie {

/// Loss formulations compared in the ablation.
enum class ConfigTag { MseOnly, MseSsim, MseSsimCos, MseSsimStdL1, MseSsimIaml };

inline constexpr std::array<ConfigTag, 5> kAllConfigTags = {
    ConfigTag::MseOnly, ConfigTag::MseSsim, ConfigTag::MseSsimCos, ConfigTag::MseSsimStdL1, ConfigTag::MseSsimIaml};

std::string_view to_string(ConfigTag tag);
/// Human-readable row label, e.g. "MSE + SSIM + IAML".
std::string_view display_name(ConfigTag tag);
/// Throws UnknownConfigTag.
ConfigTag parse_config_tag(std::string_view text);
bool uses_ssim(ConfigTag tag);
bool uses_mirror(ConfigTag tag);

struct SsimParams {
  int window_size = 11;
  double gaussian_sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;

  double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
  double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
  void validate() const;
};

struct LossConfig {
  ConfigTag tag = ConfigTag::MseSsimIaml;
  double lambda = 0.8;
  double beta = kDefaultBeta;
  double eps = kStandardizeEps;
  LevelSelection levels;
  SsimParams ssim;
};

struct LossBreakdown {
  double mse = 0;
  double ssim_loss = 0;
  double mirror = 0;
  std::vector<double> mirror_per_level;
  double total = 0;
  ConfigTag tag = ConfigTag::MseSsimIaml;

  /// total recomputed from the components under the tag's formula.
  double recombined(double lambda) const;
};

/// Normalized 1-D Gaussian taps.
std::vector<double> gaussian_window(int size, double sigma);

/// Mean local SSIM (Gaussian window, valid positions only), averaged over
/// channels and space. Throws ImageTooSmall when H or W < window.
template <typename Scalar>
Scalar ssim_index(const Tensor<Scalar>& x, const Tensor<Scalar>& y, const SsimParams& params = {});

template <typename Scalar>
Scalar mse_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target);
template <typename Scalar>
Scalar ssim_loss(const Tensor<Scalar>& x, const Tensor<Scalar>& y, const SsimParams& params = {});
template <typename Scalar>
Scalar cosine_mirror_loss(const FeaturePyramid<Scalar>& student, const FeaturePyramid<Scalar>& teacher,
                          const LevelSelection& levels = {});
template <typename Scalar>
Scalar standardized_l1_loss(const FeaturePyramid<Scalar>& student, const FeaturePyramid<Scalar>& teacher,
                            Scalar eps = Scalar(kStandardizeEps), const LevelSelection& levels = {});

namespace ops {

/// Differentiable SSIM index; gradients flow to both inputs when they require it.
template <typename Scalar>
Var<Scalar> ssim_index(Var<Scalar> x, Var<Scalar> y, const SsimParams& params);

/// 1 - mean cosine similarity of channel vectors at each position; sg on b.
template <typename Scalar>
Var<Scalar> cosine_distance(Var<Scalar> a, Var<Scalar> b);

}  // namespace ops

template <typename Scalar>
Var<Scalar> ssim_loss(Var<Scalar> x, Var<Scalar> y, const SsimParams& params);
template <typename Scalar>
Var<Scalar> cosine_mirror_loss(const std::vector<Var<Scalar>>& student, const std::vector<Var<Scalar>>& teacher,
                               const LevelSelection& levels = {});
template <typename Scalar>
MirrorTerms<Scalar> standardized_l1_terms(const std::vector<Var<Scalar>>& student,
                                          const std::vector<Var<Scalar>>& teacher, Scalar eps,
                                          const LevelSelection& levels = {});

template <typename Scalar>
struct TotalLoss {
  Var<Scalar> total;
  LossBreakdown breakdown;
};

/// total = mse [+ ssim_loss [+ lambda * mirror]] per the tag. The teacher
/// pyramid and weight map are only read by mirror variants and may be empty
/// otherwise.
template <typename Scalar>
TotalLoss<Scalar> total_loss(Var<Scalar> pred, Var<Scalar> target, const std::vector<Var<Scalar>>& student_pyramid,
                             const std::vector<Var<Scalar>>& teacher_pyramid, const WeightMap<Scalar>& weights,
                             const LossConfig& config);

}  // namespace llie
