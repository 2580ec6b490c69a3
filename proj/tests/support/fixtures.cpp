#include "fixtures.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "llie/image_io.hpp"

namespace fixtures {
namespace fs = std::filesystem;

namespace {

float quantize(double v) { return float(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)) / 255.0f; }

std::string pair_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "pair_%03d", i);
  return buf;
}

}  // namespace

llie::Tensor<float> clean_image(int height, int width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double base[3] = {0.3 + 0.4 * u(rng), 0.3 + 0.4 * u(rng), 0.3 + 0.4 * u(rng)};
  const double fx = 1 + 2 * u(rng);
  const double fy = 1 + 2 * u(rng);
  const double phase = 2 * std::numbers::pi * u(rng);
  const double cx = u(rng) * width;
  const double cy = u(rng) * height;
  const double radius = (0.2 + 0.2 * u(rng)) * std::min(height, width);
  const double disc[3] = {u(rng), u(rng), u(rng)};
  std::uniform_real_distribution<double> grain(-0.08, 0.08);

  llie::Tensor<float> img(1, 3, height, width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double wave = 0.15 * std::sin(2 * std::numbers::pi * (fx * x / width + fy * y / height) + phase);
      const bool inside = (x - cx) * (x - cx) + (y - cy) * (y - cy) < radius * radius;
      const double shade = 0.8 + 0.2 * double(y) / height;
      const double texture = grain(rng);
      for (int c = 0; c < 3; ++c) {
        const double v = (inside ? 0.5 * disc[c] + 0.4 : base[c] * shade + wave) + texture;
        img(0, c, y, x) = quantize(v);
      }
    }
  return img;
}

llie::Tensor<float> darken(const llie::Tensor<float>& clean, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.01);
  const double gain = 0.15 + 0.1 * u(rng);
  const double gamma = 1.3 + 0.4 * u(rng);
  llie::Tensor<float> low(clean.shape());
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < clean.height(); ++y)
      for (int x = 0; x < clean.width(); ++x) {
        low(0, c, y, x) = quantize(gain * std::pow(double(clean(0, c, y, x)), gamma) + noise(rng));
      }
  return low;
}

std::vector<llie::Sample> synthetic_samples(const SyntheticOptions& options) {
  std::vector<llie::Sample> out;
  for (int i = 0; i < options.count; ++i) {
    const std::uint64_t s = options.seed * 1000 + std::uint64_t(i);
    llie::Tensor<float> clean = clean_image(options.height, options.width, s);
    llie::Tensor<float> low = darken(clean, s);
    out.push_back({pair_name(i), std::move(low), std::move(clean)});
  }
  return out;
}

void write_split(const fs::path& root, const std::string& split, const SyntheticOptions& options) {
  for (const auto& s : synthetic_samples(options)) {
    llie::save_png(root / split / "low" / (s.pair_id + ".png"), s.low);
    llie::save_png(root / split / "high" / (s.pair_id + ".png"), s.clean);
  }
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("llie_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace fixtures
