#include <doctest.h>

#include <fstream>

#include "fixtures.hpp"
#include "llie/error.hpp"
#include "llie/lpips.hpp"
#include "llie/metrics.hpp"
#include "oracles.hpp"

using namespace llie;
namespace fs = std::filesystem;

namespace {

// One 1x1 conv with identity weights over RGB and a single tap.
fs::path write_identity_model(const fs::path& dir) {
  const fs::path path = dir / "tiny_lpips.json";
  std::ofstream(path) << R"({"format": "llie-lpips-v1", "shift": [0, 0, 0], "scale": [1, 1, 1],
    "layers": [{"type": "conv", "in": 3, "out": 3, "kernel": 1, "pad": 0,
                "weight": [1, 0, 0, 0, 1, 0, 0, 0, 1], "bias": [0, 0, 0]},
               {"type": "relu"}, {"type": "tap", "lin": [1, 1, 1]}]})";
  return path;
}

}  // namespace

TEST_CASE("psnr closed forms") {
  CHECK(psnr_from_mse(0.01) == doctest::Approx(20.0).epsilon(1e-15));
  CHECK(psnr_from_mse(0.0) == kPsnrCap);
  CHECK(psnr_from_mse(1.0) == doctest::Approx(0.0));
  const Tensor<double> a = Tensor<double>::constant({1, 3, 4, 4}, 0.2);
  const Tensor<double> b = Tensor<double>::constant({1, 3, 4, 4}, 0.3);
  CHECK(psnr(a, b) == doctest::Approx(20.0));
  CHECK(psnr(a, a) == kPsnrCap);
  // Out-of-range values are clamped before scoring.
  const Tensor<double> over = Tensor<double>::constant({1, 3, 4, 4}, 1.5);
  const Tensor<double> one = Tensor<double>::constant({1, 3, 4, 4}, 1.0);
  CHECK(psnr(over, one) == kPsnrCap);
}

TEST_CASE("ssim metric on constant patches") {
  const Tensor<double> a = Tensor<double>::constant({1, 3, 16, 16}, 0.2);
  const Tensor<double> b = Tensor<double>::constant({1, 3, 16, 16}, 0.6);
  const double c1 = 1e-4;
  CHECK(ssim_metric(a, b) == doctest::Approx((2 * 0.2 * 0.6 + c1) / (0.04 + 0.36 + c1)));
  CHECK(ssim_metric(a, a) == doctest::Approx(1.0));
}

TEST_CASE("report round trip and aggregates") {
  MetricsReport r;
  r.dataset = "toy/test";
  r.checkpoint = "x.ckpt";
  r.images = {{"a", 0.8, 20.0, 0.1}, {"b", 0.6, 30.0, 0.3}};
  r.aggregate();
  CHECK(r.mean_ssim == doctest::Approx(0.7));
  CHECK(r.mean_psnr == doctest::Approx(25.0));
  REQUIRE(r.mean_lpips.has_value());
  CHECK(*r.mean_lpips == doctest::Approx(0.2));

  const fs::path dir = fixtures::scratch_dir("report");
  write_report(dir / "m.json", r);
  const MetricsReport back = read_report(dir / "m.json");
  CHECK(back.dataset == r.dataset);
  CHECK(back.images.size() == 2);
  CHECK(back.images[1].lpips == r.images[1].lpips);
  CHECK(back.mean_psnr == r.mean_psnr);

  r.images[1].lpips.reset();
  r.aggregate();
  CHECK_FALSE(r.mean_lpips.has_value());
  fs::remove_all(dir);
}

TEST_CASE("tables mark a missing perceptual metric") {
  const std::vector<SummaryRow> rows = {{"MSE only", 0.81234, 20.5, std::nullopt}, {"IAML", 0.9, 22.25, 0.05}};
  const std::string table = render_table(rows);
  CHECK(table.find("MSE only") != std::string::npos);
  CHECK(table.find("0.8123") != std::string::npos);
  CHECK(table.find(" -") != std::string::npos);
  const std::string csv = render_delimited(rows);
  CHECK(csv.rfind("method,ssim,psnr,lpips\n", 0) == 0);
  CHECK(csv.find("MSE only,0.812340,20.500000,\n") != std::string::npos);
}

TEST_CASE("perceptual model plugin") {
  const fs::path dir = fixtures::scratch_dir("lpips");
  CHECK_THROWS_AS(load_perceptual_model(dir / "absent.json"), Error);
  std::ofstream(dir / "broken.json") << "{\"format\": \"other\"}";
  CHECK_THROWS_AS(load_perceptual_model(dir / "broken.json"), Error);

  const auto model = load_perceptual_model(write_identity_model(dir));
  const Tensor<double> x = oracle::random_tensor(1, 3, 8, 8, 1);
  const Tensor<double> near = oracle::random_tensor(1, 3, 8, 8, 2, 0.0, 0.05);
  Tensor<double> y = x;
  y.array() = (x.array() + near.array()).min(1.0);
  Tensor<double> z = x;
  z.array() = 1.0 - x.array();
  CHECK(model->distance(x, x) == doctest::Approx(0.0));
  CHECK(model->distance(x, y) < model->distance(x, z));
  CHECK(lpips_metric(x, x, nullptr) == std::nullopt);
  CHECK(lpips_metric(x, y, model.get()).has_value());
  fs::remove_all(dir);
}

TEST_CASE("evaluate_samples scores the identity enhancer") {
  const auto samples = fixtures::synthetic_samples({2, 16, 16, 3});
  const MetricsReport r = evaluate_samples(samples, [](const Tensor<float>& x) { return x; });
  REQUIRE(r.images.size() == 2);
  CHECK(r.images[0].pair_id == "pair_000");
  CHECK(r.images[0].psnr == doctest::Approx(psnr(samples[0].low, samples[0].clean)));
  CHECK_FALSE(r.mean_lpips.has_value());
}
