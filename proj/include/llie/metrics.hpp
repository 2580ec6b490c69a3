#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "llie/data.hpp"
#include "llie/lpips.hpp"

namespace llie {

/// Reported when the images are identical.
inline constexpr double kPsnrCap = 100.0;

/// 10 log10(max_val^2 / mse), capped at kPsnrCap.
double psnr_from_mse(double mse, double max_val = 1.0);

/// Joint PSNR over all channels, inputs clamped to [0, max_val].
template <typename Scalar>
double psnr(const Tensor<Scalar>& x, const Tensor<Scalar>& y, double max_val = 1.0);

/// ssim_index with default parameters on inputs clamped to [0,1], in double.
template <typename Scalar>
double ssim_metric(const Tensor<Scalar>& x, const Tensor<Scalar>& y);

/// Absent when no model is configured.
template <typename Scalar>
std::optional<double> lpips_metric(const Tensor<Scalar>& x, const Tensor<Scalar>& y, const PerceptualModel* model);

struct ImageMetrics {
  std::string pair_id;
  double ssim = 0;
  double psnr = 0;
  std::optional<double> lpips;
};

struct MetricsReport {
  std::string dataset;
  std::string checkpoint;
  std::vector<ImageMetrics> images;
  double mean_ssim = 0;
  double mean_psnr = 0;
  std::optional<double> mean_lpips;

  /// Recomputes the means from the per-image rows.
  void aggregate();
  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);
};

void write_report(const std::filesystem::path& path, const MetricsReport& report);
MetricsReport read_report(const std::filesystem::path& path);

using Enhancer = std::function<Tensor<float>(const Tensor<float>&)>;

/// Enhances every low-light image at full resolution and scores it against
/// its clean target.
MetricsReport evaluate_samples(const std::vector<Sample>& samples, const Enhancer& enhancer,
                               const PerceptualModel* lpips = nullptr);

/// One row of a summary table.
struct SummaryRow {
  std::string label;
  double ssim = 0;
  double psnr = 0;
  std::optional<double> lpips;
};

/// Aligned plain-text table with SSIM, PSNR and LPIPS columns ("-" when absent).
std::string render_table(const std::vector<SummaryRow>& rows, const std::string& first_column = "Method");
/// Same content as delimiter-separated values with a header line.
std::string render_delimited(const std::vector<SummaryRow>& rows, char delimiter = ',',
                             const std::string& first_column = "method");

}  // namespace llie
