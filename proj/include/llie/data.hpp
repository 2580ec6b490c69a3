#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "llie/image_io.hpp"
#include "llie/tensor.hpp"

namespace llie {

/// Low-light / normal-light pair sharing a filename stem.
struct PairRecord {
  std::filesystem::path low_path;
  std::filesystem::path clean_path;
  std::string pair_id;
};

struct PairListing {
  std::vector<PairRecord> pairs;  // sorted by pair_id
  std::vector<std::filesystem::path> unmatched;
};

/// Scans `<root>/<split>/low` and `<root>/<split>/high`, pairing files by stem.
/// Throws MissingDirectory, EmptySplit, or DimensionMismatch.
PairListing discover_pairs(const std::filesystem::path& root, const std::string& split);

/// Deterministic generator for a (seed, stream...) tuple.
std::mt19937_64 derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream);

template <typename Scalar>
using ImagePair = std::pair<Tensor<Scalar>, Tensor<Scalar>>;

/// Same size x size window cut from both images. Throws CropTooLarge.
template <typename Scalar>
ImagePair<Scalar> random_crop_pair(const Tensor<Scalar>& low, const Tensor<Scalar>& clean, int size,
                                   std::mt19937_64& rng);

/// Horizontal then vertical flip, each with probability 0.5, applied
/// identically to both images.
template <typename Scalar>
ImagePair<Scalar> flip_augment(const Tensor<Scalar>& low, const Tensor<Scalar>& clean, std::mt19937_64& rng);

template <typename Scalar>
Tensor<Scalar> flip_horizontal(const Tensor<Scalar>& image);
template <typename Scalar>
Tensor<Scalar> flip_vertical(const Tensor<Scalar>& image);

/// Decoded pair held in memory.
struct Sample {
  std::string pair_id;
  Tensor<float> low;
  Tensor<float> clean;
};

/// Loads every pair; if `min_size` > 0, pairs smaller than min_size in either
/// dimension are skipped with a warning. `limit` > 0 keeps the first `limit`.
std::vector<Sample> load_samples(const std::vector<PairRecord>& pairs, int min_size = 0, int limit = 0);

}  // namespace llie
