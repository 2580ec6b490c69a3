#include "llie/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "llie/losses.hpp"

namespace llie {

namespace {

template <typename Scalar>
Tensor<double> clamped(const Tensor<Scalar>& t, double hi) {
  Tensor<double> out(t.shape());
  out.array() = t.array().template cast<double>().max(0.0).min(hi);
  return out;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

double psnr_from_mse(double mse, double max_val) {
  if (!(mse > 0)) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(max_val * max_val / mse));
}

template <typename Scalar>
double psnr(const Tensor<Scalar>& x, const Tensor<Scalar>& y, double max_val) {
  require_same_shape(x.shape(), y.shape(), "psnr");
  const double mse = (clamped(x, max_val).array() - clamped(y, max_val).array()).square().mean();
  return psnr_from_mse(mse, max_val);
}

template <typename Scalar>
double ssim_metric(const Tensor<Scalar>& x, const Tensor<Scalar>& y) {
  return ssim_index(clamped(x, 1.0), clamped(y, 1.0), SsimParams{});
}

template <typename Scalar>
std::optional<double> lpips_metric(const Tensor<Scalar>& x, const Tensor<Scalar>& y, const PerceptualModel* model) {
  if (model == nullptr) return std::nullopt;
  return model->distance(clamped(x, 1.0), clamped(y, 1.0));
}

void MetricsReport::aggregate() {
  mean_ssim = 0;
  mean_psnr = 0;
  mean_lpips.reset();
  if (images.empty()) return;
  double lp = 0;
  bool all_lpips = true;
  for (const auto& row : images) {
    mean_ssim += row.ssim;
    mean_psnr += row.psnr;
    if (row.lpips) {
      lp += *row.lpips;
    } else {
      all_lpips = false;
    }
  }
  const double n = double(images.size());
  mean_ssim /= n;
  mean_psnr /= n;
  if (all_lpips) mean_lpips = lp / n;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : images) {
    nlohmann::json j = {{"pair_id", r.pair_id}, {"ssim", r.ssim}, {"psnr", r.psnr}};
    if (r.lpips) j["lpips"] = *r.lpips;
    rows.push_back(j);
  }
  nlohmann::json agg = {{"ssim", mean_ssim}, {"psnr", mean_psnr}, {"count", images.size()}};
  if (mean_lpips) agg["lpips"] = *mean_lpips;
  return {{"dataset", dataset}, {"checkpoint", checkpoint}, {"images", rows}, {"aggregate", agg}};
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.dataset = j.value("dataset", "");
  r.checkpoint = j.value("checkpoint", "");
  for (const auto& row : j.at("images")) {
    ImageMetrics m{row.at("pair_id"), row.at("ssim"), row.at("psnr"), std::nullopt};
    if (row.contains("lpips")) m.lpips = row.at("lpips").get<double>();
    r.images.push_back(std::move(m));
  }
  const auto& agg = j.at("aggregate");
  r.mean_ssim = agg.at("ssim");
  r.mean_psnr = agg.at("psnr");
  if (agg.contains("lpips")) r.mean_lpips = agg.at("lpips").get<double>();
  return r;
}

void write_report(const std::filesystem::path& path, const MetricsReport& report) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  out << report.to_json().dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "failed to write " + path.string());
}

MetricsReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  try {
    return MetricsReport::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoError, path.string() + ": " + e.what());
  }
}

MetricsReport evaluate_samples(const std::vector<Sample>& samples, const Enhancer& enhancer,
                               const PerceptualModel* lpips) {
  MetricsReport report;
  for (const auto& s : samples) {
    const Tensor<float> out = enhancer(s.low);
    require_same_shape(out.shape(), s.clean.shape(), "enhanced output");
    report.images.push_back({s.pair_id, ssim_metric(out, s.clean), psnr(out, s.clean), lpips_metric(out, s.clean, lpips)});
  }
  report.aggregate();
  return report;
}

std::string render_table(const std::vector<SummaryRow>& rows, const std::string& first_column) {
  std::size_t width = first_column.size();
  for (const auto& r : rows) width = std::max(width, r.label.size());
  std::ostringstream os;
  auto line = [&](const std::string& a, const std::string& b, const std::string& c, const std::string& d) {
    os << a << std::string(width - a.size() + 2, ' ');
    for (const std::string* col : {&b, &c, &d}) os << std::string(10 - std::min<std::size_t>(10, col->size()), ' ') << *col;
    os << '\n';
  };
  line(first_column, "SSIM", "PSNR", "LPIPS");
  os << std::string(width + 2 + 30, '-') << '\n';
  for (const auto& r : rows) line(r.label, fixed(r.ssim, 4), fixed(r.psnr, 2), r.lpips ? fixed(*r.lpips, 4) : "-");
  return os.str();
}

std::string render_delimited(const std::vector<SummaryRow>& rows, char delimiter, const std::string& first_column) {
  std::ostringstream os;
  os << first_column << delimiter << "ssim" << delimiter << "psnr" << delimiter << "lpips\n";
  for (const auto& r : rows) {
    os << r.label << delimiter << fixed(r.ssim, 6) << delimiter << fixed(r.psnr, 6) << delimiter
       << (r.lpips ? fixed(*r.lpips, 6) : "") << '\n';
  }
  return os.str();
}

#define LLIE_INSTANTIATE_METRICS(S)                                                           \
  template double psnr(const Tensor<S>&, const Tensor<S>&, double);                           \
  template double ssim_metric(const Tensor<S>&, const Tensor<S>&);                            \
  template std::optional<double> lpips_metric(const Tensor<S>&, const Tensor<S>&, const PerceptualModel*);

LLIE_INSTANTIATE_METRICS(float)
LLIE_INSTANTIATE_METRICS(double)

}  // namespace llie
