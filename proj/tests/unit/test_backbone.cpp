#include <doctest.h>

#include "llie/backbone.hpp"
#include "llie/error.hpp"
#include "oracles.hpp"

using namespace llie;

namespace {

BackboneConfig small() {
  BackboneConfig m;
  m.depth = 2;
  m.base_channels = 4;
  m.cbam_reduction = 2;
  return m;
}

}  // namespace

TEST_CASE("forward shapes, pyramid order and output range") {
  const BackboneConfig m = small();
  std::mt19937_64 rng(1);
  ParameterSet<double> enc = make_encoder_weights<double>(m, rng);
  ParameterSet<double> dec = make_decoder_weights<double>(m, rng);
  Graph<double> g(false);
  const DecoderOutput<double> out = forward(m, enc, dec, g.constant(oracle::random_tensor(2, 3, 16, 12, 2)));
  CHECK(out.image.shape() == Shape{2, 3, 16, 12});
  REQUIRE(out.pyramid.size() == 2);
  CHECK(out.pyramid[0].shape() == Shape{2, 8, 8, 6});
  CHECK(out.pyramid[1].shape() == Shape{2, 4, 16, 12});
  CHECK(out.image.value().array().minCoeff() > 0.0);
  CHECK(out.image.value().array().maxCoeff() < 1.0);
}

TEST_CASE("parameter count agrees with the built sets") {
  const BackboneConfig m = small();
  std::mt19937_64 rng(1);
  const auto enc = make_encoder_weights<float>(m, rng);
  const auto dec = make_decoder_weights<float>(m, rng);
  CHECK(parameter_count(m) == enc.count() + dec.count());
}

TEST_CASE("same seed gives the same weights") {
  std::mt19937_64 a(7);
  std::mt19937_64 b(7);
  std::mt19937_64 c(8);
  const auto wa = make_encoder_weights<double>(small(), a);
  CHECK(wa.flatten() == make_encoder_weights<double>(small(), b).flatten());
  CHECK(wa.flatten() != make_encoder_weights<double>(small(), c).flatten());
}

TEST_CASE("invalid inputs are rejected") {
  const BackboneConfig m = small();
  std::mt19937_64 rng(1);
  ParameterSet<double> enc = make_encoder_weights<double>(m, rng);
  ParameterSet<double> dec = make_decoder_weights<double>(m, rng);
  Graph<double> g(false);
  CHECK_THROWS_AS(forward(m, enc, dec, g.constant(oracle::random_tensor(1, 3, 10, 12, 1))), Error);
  CHECK_THROWS_AS(forward(m, enc, dec, g.constant(oracle::random_tensor(1, 1, 16, 16, 1))), Error);
  BackboneConfig bad = m;
  bad.depth = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = m;
  bad.cbam_spatial_kernel = 4;
  CHECK_THROWS_AS(bad.validate(), Error);
}
