#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <random>

#include "difflab/errors.hpp"
#include "difflab/mixture.hpp"
#include "oracles.hpp"

using namespace difflab;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST_CASE("construction rejects malformed mixtures") {
  CHECK_THROWS_AS(Mixture(0, {{0.0, Vector(), 1.0}}), InputError);
  CHECK_THROWS_AS(Mixture(1, {}), InputError);
  CHECK_THROWS_AS(Mixture(2, {{0.0, vec({0.0}), 1.0}}), InputError);
  CHECK_THROWS_AS(Mixture(1, {{0.0, vec({0.0}), 0.0}}), InputError);
  CHECK_THROWS_AS(Mixture(1, {{0.0, vec({0.0}), NAN}}), InputError);
  CHECK_THROWS_AS(Mixture(1, {{std::log(0.6), vec({0.0}), 1.0}}), InputError);
  CHECK_THROWS_AS(Mixture::from_weights({0.5, 0.6}, {vec({0}), vec({1})}, {1, 1}), InputError);
  CHECK_NOTHROW(Mixture::from_weights({0.25, 0.75}, {vec({0}), vec({1})}, {1, 2}));
}

TEST_CASE("log density matches the direct formula") {
  std::mt19937_64 gen(11);
  for (int d : {1, 2, 3}) {
    for (int rep = 0; rep < 20; ++rep) {
      const Mixture g = oracle::random_mixture(gen, d);
      std::normal_distribution<double> normal(0.0, 2.0);
      Vector x(d);
      for (int j = 0; j < d; ++j) x[j] = normal(gen);
      CHECK(log_density(g, x) == doctest::Approx(std::log(oracle::density(g, x))).epsilon(1e-12));
    }
  }
}

TEST_CASE("1-d density integrates to one and the CDF matches its integral") {
  const Mixture g = Mixture::from_weights({0.3, 0.7}, {vec({-1.0}), vec({2.0})}, {0.25, 0.5});
  using boost::math::quadrature::gauss_kronrod;
  const auto f = [&](double x) { return density_1d(g, x); };
  const double total = gauss_kronrod<double, 61>::integrate(f, -15.0, 15.0, 15, 1e-13);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
  for (double x : {-3.0, -1.0, 0.0, 1.5, 4.0}) {
    const double integral = gauss_kronrod<double, 61>::integrate(f, -15.0, x, 15, 1e-13);
    CHECK(cdf_1d(g, x) == doctest::Approx(integral).epsilon(1e-9));
    CHECK(cdf_1d(g, x) == doctest::Approx(oracle::mixture_cdf(g, x)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(density_1d(standard_normal(2), 0.0), InputError);
}

TEST_CASE("score and Jacobian agree with finite differences") {
  std::mt19937_64 gen(5);
  for (int d : {1, 2, 3}) {
    for (int rep = 0; rep < 20; ++rep) {
      const Mixture g = oracle::random_mixture(gen, d);
      std::normal_distribution<double> normal(0.0, 1.5);
      Vector x(d);
      for (int j = 0; j < d; ++j) x[j] = normal(gen);
      const double h = 1e-5 * std::sqrt(g.min_variance());
      const Vector fd = oracle::gradient([&](const Vector& y) { return log_density(g, y); }, x, h);
      const Vector s = score(g, x);
      CHECK((fd - s).norm() <= 1e-5 * std::max(1.0, s.norm()));

      const Matrix jfd = oracle::jacobian([&](const Vector& y) { return score(g, y); }, x, h);
      const Matrix j = score_jacobian(g, x);
      CHECK((jfd - j).norm() <= 1e-4 * std::max(1.0, j.norm()));
      CHECK((j - j.transpose()).norm() == 0.0);

      const double lowest = Eigen::SelfAdjointEigenSolver<Matrix>(j).eigenvalues().minCoeff();
      CHECK(lowest >= -1.0 / g.min_variance() - 1e-8);
    }
  }
}

TEST_CASE("evaluate bundles score and log density") {
  const Mixture g = two_gaussian(0.5, 0.2);
  const Vector x = vec({0.3});
  const auto e = evaluate(g, x);
  CHECK(e.point == x);
  CHECK(e.score == score(g, x));
  CHECK(e.log_density == log_density(g, x));
}

TEST_CASE("responsibilities stay finite far from every component") {
  const Mixture g = two_gaussian(1.0, 0.01);
  for (double x : {0.0, 1.0, 50.0, -1e4, 1e6}) {
    const auto r = responsibilities(g, vec({x}));
    CHECK(r[0] + r[1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::isfinite(score(g, vec({x}))[0]));
    CHECK(std::isfinite(log_density(g, vec({x}))));
  }
  // Deep in the right tail the right component owns the point.
  CHECK(responsibilities(g, vec({50.0}))[1] == 1.0);
}

TEST_CASE("single Gaussian score is linear") {
  const Mixture g = single_gaussian(0.5, 2);
  const Vector x = vec({1.0, -2.0});
  const Vector expected = -x / 0.25;
  CHECK((score(g, x) - expected).norm() < 1e-12);
  CHECK((score_jacobian(g, x) + Matrix::Identity(2, 2) / 0.25).norm() < 1e-12);
}

TEST_CASE("smoothing follows the Ornstein-Uhlenbeck moment laws") {
  const Mixture g = Mixture::from_weights({0.4, 0.6}, {vec({-1.0}), vec({0.5})}, {0.09, 0.04});
  for (double t : {0.0, 1e-6, 0.1, 1.0, 5.0}) {
    const Mixture q = smooth(g, t);
    const double a = std::exp(-t);
    CHECK(q.mean_1d() == doctest::Approx(a * g.mean_1d()).epsilon(1e-13));
    CHECK(q.variance_1d() ==
          doctest::Approx(a * a * g.variance_1d() + (1.0 - std::exp(-2.0 * t))).epsilon(1e-12));
  }
  // Semigroup property.
  const Mixture two_step = smooth(smooth(g, 0.3), 0.45);
  const Mixture one_step = smooth(g, 0.75);
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(two_step.components()[i].mean[0] ==
          doctest::Approx(one_step.components()[i].mean[0]).epsilon(1e-14));
    CHECK(two_step.components()[i].variance ==
          doctest::Approx(one_step.components()[i].variance).epsilon(1e-14));
  }
  CHECK_THROWS_AS(smooth(g, -0.1), InputError);

  const Mixture c = convolve(g, 0.5);
  CHECK(c.variance_1d() == doctest::Approx(g.variance_1d() + 0.5).epsilon(1e-14));
  CHECK(c.mean_1d() == doctest::Approx(g.mean_1d()).epsilon(1e-14));
}

TEST_CASE("samples pass a Kolmogorov-Smirnov test against the analytic CDF") {
  const Mixture g = Mixture::from_weights({0.2, 0.5, 0.3}, {vec({-2.0}), vec({0.0}), vec({3.0})},
                                          {0.1, 1.0, 0.3});
  Stream rng(99);
  const std::size_t n = 50000;
  const Points xs = sample(g, rng, n);
  std::vector<double> values;
  for (const auto& x : xs) values.push_back(x[0]);
  const double ks = oracle::ks_statistic(values, [&](double x) { return oracle::mixture_cdf(g, x); });
  CHECK(ks < oracle::ks_critical_001(n));
}

TEST_CASE("second moment and summary statistics") {
  const Mixture g = Mixture::from_weights({0.5, 0.5}, {vec({1.0, 0.0}), vec({0.0, 2.0})}, {0.25, 1.0});
  // sum w (|mu|^2 + d v) = 0.5 (1 + 0.5) + 0.5 (4 + 2)
  CHECK(g.second_moment() == doctest::Approx(std::sqrt(3.75)).epsilon(1e-15));
  CHECK(g.min_variance() == 0.25);
  CHECK_THROWS_AS(g.mean_1d(), InputError);
}

TEST_CASE("JSON round trip keeps parameters and underflowing weights") {
  const Mixture g(1, {{-800.0, vec({0.0}), 1.0}, {std::log1p(-std::exp(-800.0)), vec({3.0}), 0.5}});
  const nlohmann::json j = g;
  CHECK(j["components"][0].contains("log_w"));
  const Mixture back = mixture_from_json(j);
  CHECK(back.components()[0].log_weight == -800.0);
  CHECK(back.components()[1].mean[0] == 3.0);
  CHECK(back.components()[1].variance == 0.5);

  CHECK_THROWS_AS(mixture_from_json(nlohmann::json{{"dim", 1}}), InputError);
  CHECK_THROWS_AS(mixture_from_json(nlohmann::json::parse(
                      R"({"dim":1,"components":[{"w":-1,"mean":[0],"var":1}]})")),
                  InputError);
}

TEST_CASE("presets") {
  CHECK(standard_normal(3).dim() == 3);
  CHECK(single_gaussian(0.1).components()[0].variance == doctest::Approx(0.01));
  const Mixture tg = two_gaussian(0.5, 0.01);
  CHECK(tg.size() == 2);
  CHECK(tg.mean_1d() == doctest::Approx(0.0));
  CHECK(tg.variance_1d() == doctest::Approx(0.25 + 1e-4));
  CHECK_THROWS_AS(single_gaussian(0.0), InputError);
}
