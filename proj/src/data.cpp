#include "llie/data.hpp"

#include <algorithm>
#include <map>

namespace llie {
namespace fs = std::filesystem;

namespace {

std::map<std::string, fs::path> images_by_stem(const fs::path& dir) {
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || !is_image_file(entry.path())) continue;
    out.emplace(entry.path().stem().string(), entry.path());
  }
  return out;
}

}  // namespace

PairListing discover_pairs(const fs::path& root, const std::string& split) {
  const fs::path low_dir = root / split / "low";
  const fs::path high_dir = root / split / "high";
  for (const auto& dir : {low_dir, high_dir}) {
    if (!fs::is_directory(dir)) throw Error(ErrorCode::MissingDirectory, dir.string());
  }
  const auto lows = images_by_stem(low_dir);
  const auto highs = images_by_stem(high_dir);

  PairListing listing;
  for (const auto& [stem, low] : lows) {
    const auto it = highs.find(stem);
    if (it == highs.end()) {
      listing.unmatched.push_back(low);
      continue;
    }
    if (!(read_image_size(low) == read_image_size(it->second))) {
      throw Error(ErrorCode::DimensionMismatch, "pair '" + stem + "' has differently sized images");
    }
    listing.pairs.push_back({low, it->second, stem});
  }
  for (const auto& [stem, high] : highs) {
    if (!lows.contains(stem)) listing.unmatched.push_back(high);
  }
  for (const auto& path : listing.unmatched) warn("unpaired image " + path.string());
  if (listing.pairs.empty()) {
    throw Error(ErrorCode::EmptySplit, "no image pairs under " + (root / split).string());
  }
  return listing;
}

std::mt19937_64 derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream) {
  std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  for (std::uint64_t s : stream) {
    words.push_back(static_cast<std::uint32_t>(s));
    words.push_back(static_cast<std::uint32_t>(s >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

template <typename Scalar>
ImagePair<Scalar> random_crop_pair(const Tensor<Scalar>& low, const Tensor<Scalar>& clean, int size,
                                   std::mt19937_64& rng) {
  require_same_shape(low.shape(), clean.shape(), "random_crop_pair");
  const int h = low.height();
  const int w = low.width();
  if (size < 1 || h < size || w < size) {
    throw Error(ErrorCode::CropTooLarge, "crop " + std::to_string(size) + " exceeds image " + low.shape().str());
  }
  const int oy = std::uniform_int_distribution<int>(0, h - size)(rng);
  const int ox = std::uniform_int_distribution<int>(0, w - size)(rng);
  auto cut = [&](const Tensor<Scalar>& src) {
    Tensor<Scalar> out(src.batch(), src.channels(), size, size);
    for (int n = 0; n < src.batch(); ++n)
      for (int c = 0; c < src.channels(); ++c) out.plane(n, c) = src.plane(n, c).block(oy, ox, size, size);
    return out;
  };
  return {cut(low), cut(clean)};
}

template <typename Scalar>
Tensor<Scalar> flip_horizontal(const Tensor<Scalar>& image) {
  Tensor<Scalar> out(image.shape());
  for (int n = 0; n < image.batch(); ++n)
    for (int c = 0; c < image.channels(); ++c) out.plane(n, c) = image.plane(n, c).rowwise().reverse();
  return out;
}

template <typename Scalar>
Tensor<Scalar> flip_vertical(const Tensor<Scalar>& image) {
  Tensor<Scalar> out(image.shape());
  for (int n = 0; n < image.batch(); ++n)
    for (int c = 0; c < image.channels(); ++c) out.plane(n, c) = image.plane(n, c).colwise().reverse();
  return out;
}

template <typename Scalar>
ImagePair<Scalar> flip_augment(const Tensor<Scalar>& low, const Tensor<Scalar>& clean, std::mt19937_64& rng) {
  require_same_shape(low.shape(), clean.shape(), "flip_augment");
  std::bernoulli_distribution coin(0.5);
  const bool horizontal = coin(rng);
  const bool vertical = coin(rng);
  ImagePair<Scalar> out{low, clean};
  if (horizontal) out = {flip_horizontal(out.first), flip_horizontal(out.second)};
  if (vertical) out = {flip_vertical(out.first), flip_vertical(out.second)};
  return out;
}

std::vector<Sample> load_samples(const std::vector<PairRecord>& pairs, int min_size, int limit) {
  std::vector<Sample> out;
  for (const auto& pair : pairs) {
    if (limit > 0 && int(out.size()) >= limit) break;
    Sample s{pair.pair_id, load_image(pair.low_path), load_image(pair.clean_path)};
    if (!(s.low.shape() == s.clean.shape())) {
      throw Error(ErrorCode::DimensionMismatch, "pair '" + pair.pair_id + "' has differently sized images");
    }
    if (min_size > 0 && (s.low.height() < min_size || s.low.width() < min_size)) {
      warn("skipping pair '" + pair.pair_id + "': smaller than crop size " + std::to_string(min_size));
      continue;
    }
    out.push_back(std::move(s));
  }
  return out;
}

#define LLIE_INSTANTIATE_DATA(S)                                                                     \
  template ImagePair<S> random_crop_pair(const Tensor<S>&, const Tensor<S>&, int, std::mt19937_64&); \
  template ImagePair<S> flip_augment(const Tensor<S>&, const Tensor<S>&, std::mt19937_64&);          \
  template Tensor<S> flip_horizontal(const Tensor<S>&);                                              \
  template Tensor<S> flip_vertical(const Tensor<S>&);

LLIE_INSTANTIATE_DATA(float)
LLIE_INSTANTIATE_DATA(double)

}  // namespace llie
