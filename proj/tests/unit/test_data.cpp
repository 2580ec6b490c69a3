#include <doctest.h>

#include <filesystem>

#include "fixtures.hpp"
#include "llie/data.hpp"
#include "llie/error.hpp"
#include "llie/image_io.hpp"

using namespace llie;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an llie::Error");
  return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("discover_pairs matches by stem and reports orphans") {
  const fs::path root = fixtures::scratch_dir("discover");
  fixtures::write_split(root, "train", {3, 16, 16, 1});
  save_png(root / "train" / "low" / "orphan.png", fixtures::clean_image(16, 16, 9));
  const PairListing listing = discover_pairs(root, "train");
  REQUIRE(listing.pairs.size() == 3);
  CHECK(listing.pairs[0].pair_id == "pair_000");
  CHECK(listing.pairs[2].pair_id == "pair_002");
  CHECK(listing.pairs[1].low_path.filename() == "pair_001.png");
  REQUIRE(listing.unmatched.size() == 1);
  CHECK(listing.unmatched[0].filename() == "orphan.png");
  fs::remove_all(root);
}

TEST_CASE("discover_pairs errors") {
  const fs::path root = fixtures::scratch_dir("discover_err");
  CHECK(code_of([&] { discover_pairs(root, "train"); }) == ErrorCode::MissingDirectory);
  fs::create_directories(root / "train" / "low");
  fs::create_directories(root / "train" / "high");
  CHECK(code_of([&] { discover_pairs(root, "train"); }) == ErrorCode::EmptySplit);
  save_png(root / "train" / "low" / "a.png", fixtures::clean_image(16, 16, 1));
  save_png(root / "train" / "high" / "a.png", fixtures::clean_image(16, 24, 1));
  CHECK(code_of([&] { discover_pairs(root, "train"); }) == ErrorCode::DimensionMismatch);
  fs::remove_all(root);
}

TEST_CASE("png round trip is exact at 8 bits") {
  const fs::path root = fixtures::scratch_dir("png");
  const Tensor<float> img = fixtures::clean_image(12, 20, 4);
  save_png(root / "x.png", img);
  const Tensor<float> back = load_image(root / "x.png");
  CHECK(back.shape() == img.shape());
  CHECK((back.array() - img.array()).abs().maxCoeff() < 1e-6f);
  CHECK(read_image_size(root / "x.png") == ImageSize{12, 20});
  fs::remove_all(root);
}

TEST_CASE("crop and flips move both images together") {
  const Tensor<float> low = fixtures::clean_image(16, 24, 1);
  Tensor<float> clean = low;
  clean.array() *= 0.5f;
  std::mt19937_64 rng = derive_rng(5, {1, 2});
  const auto [a, b] = random_crop_pair(low, clean, 8, rng);
  CHECK(a.height() == 8);
  CHECK(a.width() == 8);
  CHECK((b.array() - 0.5f * a.array()).abs().maxCoeff() < 1e-7f);
  CHECK(code_of([&] { random_crop_pair(low, clean, 20, rng); }) == ErrorCode::CropTooLarge);

  const Tensor<float> h = flip_horizontal(low);
  CHECK(h(0, 1, 3, 0) == low(0, 1, 3, 23));
  const Tensor<float> v = flip_vertical(low);
  CHECK(v(0, 2, 0, 5) == low(0, 2, 15, 5));
  CHECK((flip_horizontal(h).array() == low.array()).all());

  for (int i = 0; i < 8; ++i) {
    const auto [fa, fb] = flip_augment(low, clean, rng);
    CHECK((fb.array() - 0.5f * fa.array()).abs().maxCoeff() < 1e-7f);
  }
}

TEST_CASE("derive_rng is a pure function of its inputs") {
  std::mt19937_64 a = derive_rng(1, {2, 3});
  std::mt19937_64 b = derive_rng(1, {2, 3});
  std::mt19937_64 c = derive_rng(1, {3, 2});
  const auto x = a();
  CHECK(x == b());
  CHECK(x != c());
}

TEST_CASE("load_samples skips small images and honours the limit") {
  const fs::path root = fixtures::scratch_dir("load");
  fixtures::write_split(root, "train", {3, 16, 16, 2});
  const auto pairs = discover_pairs(root, "train").pairs;
  CHECK(load_samples(pairs).size() == 3);
  CHECK(load_samples(pairs, 0, 2).size() == 2);
  CHECK(load_samples(pairs, 32).empty());
  fs::remove_all(root);
}
