#include <doctest.h>

#include "gradcheck.hpp"
#include "llie/error.hpp"
#include "llie/mirror_loss.hpp"
#include "oracles.hpp"

using namespace llie;

TEST_CASE("standardized groups have zero mean and unit deviation") {
  const Tensor<double> f = oracle::random_tensor(2, 3, 5, 7, 1, -4, 9);
  const Tensor<double> s = standardize_features(f);
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c) {
      const auto p = s.plane(n, c).array();
      CHECK(std::abs(p.mean()) < 1e-12);
      CHECK(std::sqrt((p - p.mean()).square().mean()) == doctest::Approx(1.0).epsilon(1e-4));
    }
}

TEST_CASE("a constant group standardizes to zero") {
  const Tensor<double> f = Tensor<double>::constant({1, 2, 3, 3}, 4.2);
  CHECK((standardize_features(f).array() == 0.0).all());
}

TEST_CASE("identical features give zero loss") {
  const Tensor<double> f = oracle::random_tensor(1, 4, 6, 6, 2);
  const Tensor<double> w = Tensor<double>::constant({1, 1, 6, 6}, 1.3);
  CHECK(iaml_level(f, f, w) == 0.0);
}

TEST_CASE("level loss scales with the weight map") {
  const Tensor<double> a = oracle::random_tensor(1, 2, 4, 4, 3);
  const Tensor<double> b = oracle::random_tensor(1, 2, 4, 4, 4);
  const Tensor<double> one = Tensor<double>::constant({1, 1, 4, 4}, 1.0);
  const Tensor<double> more = Tensor<double>::constant({1, 1, 4, 4}, 1.6);
  CHECK(iaml_level(a, b, more) == doctest::Approx(1.6 * iaml_level(a, b, one)));
}

TEST_CASE("total averages the selected levels") {
  const WeightMap<double> w = illumination_weights(oracle::random_tensor(1, 3, 8, 8, 9), 0.6);
  std::vector<Tensor<double>> s;
  std::vector<Tensor<double>> t;
  for (int size : {2, 4, 8}) {
    s.push_back(oracle::random_tensor(1, 3, size, size, 10 + size));
    t.push_back(oracle::random_tensor(1, 3, size, size, 20 + size));
  }
  const MirrorValue<double> all = iaml_total(s, t, w);
  REQUIRE(all.per_level.size() == 3);
  CHECK(all.total == doctest::Approx((all.per_level[0] + all.per_level[1] + all.per_level[2]) / 3));
  const MirrorValue<double> two = iaml_total(s, t, w, 1e-6, {1, 3});
  CHECK(two.total == doctest::Approx((all.per_level[0] + all.per_level[2]) / 2));
  CHECK_THROWS_AS(iaml_total(s, t, w, 1e-6, {4}), Error);
  t.pop_back();
  CHECK_THROWS_AS(iaml_total(s, t, w), Error);
}

TEST_CASE("gradient reaches the student only and matches differences") {
  const Tensor<double> fs = oracle::random_tensor(1, 2, 4, 4, 5, -1, 1);
  const Tensor<double> ft = oracle::random_tensor(1, 2, 4, 4, 6, -1, 1);
  const WeightMap<double> w = illumination_weights(oracle::random_tensor(1, 3, 4, 4, 7), 0.6);
  Graph<double> g(true);
  const Var<double> a = g.leaf(fs);
  const Var<double> b = g.leaf(ft);
  g.backward(iaml_level(a, b, w.data));
  CHECK(g.grad(b).array().abs().maxCoeff() == 0.0);

  Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(fs.data(), fs.size());
  Eigen::VectorXd analytic = Eigen::Map<const Eigen::VectorXd>(g.grad(a).data(), fs.size());
  auto f = [&](const Eigen::VectorXd& v) {
    Tensor<double> t(fs.shape());
    t.array() = v.array();
    return iaml_level(t, ft, w.data);
  };
  CHECK(gradcheck::compare(f, x, analytic).max_rel < 1e-5);
}
