#pragma once

// Synthetic paired data in the canonical <root>/<split>/{low,high} layout:
// procedural scenes with fine grain as the clean images, and darkened, gamma-bent,
// noisy 8-bit copies as the low-light inputs.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "llie/data.hpp"

namespace fixtures {

struct SyntheticOptions {
  int count = 4;
  int height = 32;
  int width = 32;
  std::uint64_t seed = 7;
};

llie::Tensor<float> clean_image(int height, int width, std::uint64_t seed);
llie::Tensor<float> darken(const llie::Tensor<float>& clean, std::uint64_t seed);

/// Writes `count` pairs named pair_000.png ... into root/split/{low,high}.
void write_split(const std::filesystem::path& root, const std::string& split, const SyntheticOptions& options);

/// The same pairs as write_split would produce, decoded back from 8 bits.
std::vector<llie::Sample> synthetic_samples(const SyntheticOptions& options);

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

}  // namespace fixtures
