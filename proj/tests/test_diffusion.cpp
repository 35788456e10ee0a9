#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <numeric>
#include <random>

#include "difflab/diffusion.hpp"
#include "difflab/errors.hpp"
#include "difflab/parallel.hpp"
#include "difflab/schedule.hpp"
#include "oracles.hpp"

using namespace difflab;

namespace {

double chi2_quantile(double dof, double p) {
  return boost::math::quantile(boost::math::chi_squared(dof), p);
}

// 0.9 quantile of max_{[0,1]} |W| for a standard Brownian motion, from the
// reflection-principle series for P(max |W| < x).
double max_abs_bm_quantile_090() {
  auto below = [](double x) {
    double s = 0.0;
    for (int k = 0; k < 60; ++k) {
      const double m = 2.0 * k + 1.0;
      s += (k % 2 ? -1.0 : 1.0) / m * std::exp(-m * m * M_PI * M_PI / (8.0 * x * x));
    }
    return 4.0 / M_PI * s;
  };
  double lo = 0.5, hi = 5.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (below(mid) < 0.9 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("noise variance and its inverse") {
  for (double t : {1e-12, 1e-6, 0.01, 0.5, 3.0}) {
    CHECK(sigma_sq(t) == doctest::Approx(1.0 - std::exp(-2.0 * t)).epsilon(1e-9));
    CHECK(time_for_sigma_sq(sigma_sq(t)) == doctest::Approx(t).epsilon(1e-12));
  }
  // Small times keep full relative precision.
  CHECK(sigma_sq(1e-12) == doctest::Approx(2e-12).epsilon(1e-10));
  CHECK_THROWS_AS(time_for_sigma_sq(1.0), InputError);
  CHECK_THROWS_AS(NoiseLevel::at(-1.0), InputError);
  CHECK(NoiseLevel::at(0.25).sigma_sq == sigma_sq(0.25));
}

TEST_CASE("upper quantile uses the ceil((1 - delta) n) order statistic") {
  std::vector<double> v(10);
  std::iota(v.begin(), v.end(), 1.0);
  CHECK(upper_quantile(v, 0.1) == 9.0);
  CHECK(upper_quantile(v, 0.05) == 10.0);
  CHECK(upper_quantile(v, 0.99) == 1.0);
  CHECK(upper_quantile(v, 0.0) == 10.0);
  CHECK(upper_quantile(v, 1.0) == 1.0);
  CHECK_THROWS_AS(upper_quantile({}, 0.1), InputError);
  CHECK_THROWS_AS(upper_quantile(v, 1.5), InputError);
}

TEST_CASE("forward marginal variance lies in the chi-square interval") {
  const double rho = 0.3, t = 0.4;
  Stream rng(17);
  const std::size_t n = 20000;
  const Points xs = forward_marginal_sample(single_gaussian(rho), t, rng, n);
  double ss = 0.0;
  for (const auto& x : xs) ss += x[0] * x[0];
  const double var = std::exp(-2.0 * t) * rho * rho + sigma_sq(t);
  // ss / var ~ chi2(n); two-sided 0.999 interval.
  CHECK(ss / var > chi2_quantile(n, 0.0005));
  CHECK(ss / var < chi2_quantile(n, 0.9995));
}

TEST_CASE("forward paths have the requested grid and law") {
  Stream rng(1);
  const auto path = simulate_forward_path(standard_normal(2), 0.2, 0.7, 10, rng);
  CHECK(path.times.size() == 11);
  CHECK(path.states.size() == 11);
  CHECK(path.times.front() == 0.2);
  CHECK(path.times.back() == 0.7);
  CHECK_THROWS_AS(simulate_forward_path(standard_normal(1), 0.5, 0.5, 4, rng), InputError);

  // Stationary start: the lag-h increment has variance 2 (1 - e^{-h}).
  const double h = 0.3;
  const std::size_t n = 20000;
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = simulate_forward_path(standard_normal(1), 1.0, 1.0 + h, 3, rng);
    const double inc = p.states.back()[0] - p.states.front()[0];
    ss += inc * inc;
  }
  const double var = 2.0 * (1.0 - std::exp(-h));
  CHECK(ss / var > chi2_quantile(n, 0.0005));
  CHECK(ss / var < chi2_quantile(n, 0.9995));
}

TEST_CASE("maximum deviation matches the reflection-principle law of max |W|") {
  // The statistic does not depend on q0: it is 2 max |W|^2 over the window up
  // to e^{2u} factors. A 64-point grid lowers the running maximum by about
  // 0.5826 sqrt(cell) (Siegmund's discrete-monitoring correction).
  const double h = 0.01;
  const double x = max_abs_bm_quantile_090() - 0.5826 / std::sqrt(63.0);
  const double expected = std::expm1(2.0 * h) * x * x / (h * (1.0 + std::log(10.0)));
  const auto r = verify_max_deviation(standard_normal(1), 1.0, h, 8000, 0.1, 3);
  CHECK(r.lemma_id == "movbnd");
  CHECK(r.empirical_constant == doctest::Approx(expected).epsilon(0.04));
  CHECK(verify_max_deviation(single_gaussian(0.1), 1.0, h, 8000, 0.1, 3).empirical_constant ==
        doctest::Approx(r.empirical_constant).epsilon(1e-9));

  const auto zero = verify_max_deviation(standard_normal(1), 1.0, 0.0, 100, 0.1, 3);
  CHECK(zero.empirical_quantile == 0.0);
  CHECK(zero.empirical_constant == 0.0);
  CHECK_THROWS_AS(verify_max_deviation(standard_normal(1), 1.0, 1.0, 100, 0.1, 3), InputError);
  CHECK_THROWS_AS(verify_max_deviation(standard_normal(1), 0.05, 0.1, 100, 0.1, 3), InputError);
  CHECK_THROWS_AS(verify_max_deviation(standard_normal(1), 1.0, 0.1, 0, 0.1, 3), InputError);
}

TEST_CASE("score norm of a Gaussian is chi-square distributed") {
  // For q0 = N(0, rho^2 I), |s_t(x)|^2 = chi2_d / v_t with v_t = e^{-2t} rho^2 + sigma_t^2.
  for (int d : {1, 3}) {
    const double rho = 0.5, t = 0.1;
    const auto r = verify_score_norm_subgaussian(single_gaussian(rho, d), t, 20000, 0.1, 8);
    const double v = std::exp(-2.0 * t) * rho * rho + sigma_sq(t);
    CHECK(r.empirical_quantile == doctest::Approx(chi2_quantile(d, 0.9) / v).epsilon(0.04));
    CHECK(r.bound_form == doctest::Approx((d + std::log(10.0)) / sigma_sq(t)));
    CHECK(r.empirical_constant == doctest::Approx(r.empirical_quantile / r.bound_form));
  }
}

TEST_CASE("Lipschitz verifier is exact on Gaussians") {
  const double rho = 0.5, t = 0.2;
  const auto r = verify_local_lipschitz(single_gaussian(rho, 2), t, 1.0, 200, 0.1, 1);
  const double v = std::exp(-2.0 * t) * rho * rho + sigma_sq(t);
  CHECK(r.empirical_quantile == doctest::Approx(1.0 / v).epsilon(1e-7));
  CHECK_THROWS_AS(verify_local_lipschitz(standard_normal(17), t, 1.0, 10, 0.1, 1), InputError);
}

TEST_CASE("spectral norm agrees with a symmetric eigensolver") {
  std::mt19937_64 gen(2);
  std::normal_distribution<double> normal;
  for (int d : {1, 2, 5, 8}) {
    Matrix a(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) a(i, j) = normal(gen);
    const Matrix m = a + a.transpose();
    const double expected = Eigen::SelfAdjointEigenSolver<Matrix>(m).eigenvalues().cwiseAbs().maxCoeff();
    CHECK(spectral_norm(m) == doctest::Approx(expected).epsilon(1e-6));
  }
  CHECK(spectral_norm(Matrix::Zero(3, 3)) == 0.0);
}

TEST_CASE("smoothing drift vanishes for the standard normal and is closed form for Gaussians") {
  const auto zero = verify_smoothing_drift(standard_normal(1), 0.3, 0.01, 500, 0.1, 2);
  CHECK(zero.empirical_quantile == 0.0);
  CHECK(zero.empirical_constant == 0.0);

  // q0 = N(0, rho^2): s_t(x) = -x / v_t, so the statistic is x^2 (1/v_lo - 1/v_hi)^2.
  const double rho = 0.2, t = 0.3, eta = 0.05;
  const double s2 = sigma_sq(t);
  const double t_lo = time_for_sigma_sq((1 - eta) * (1 - eta) * s2);
  const double v_hi = std::exp(-2 * t) * rho * rho + s2;
  const double v_lo = std::exp(-2 * t_lo) * rho * rho + sigma_sq(t_lo);
  const double gap = 1.0 / v_lo - 1.0 / v_hi;
  const auto r = verify_smoothing_drift(single_gaussian(rho), t, eta, 20000, 0.1, 2);
  CHECK(r.empirical_quantile == doctest::Approx(chi2_quantile(1, 0.9) * v_hi * gap * gap).epsilon(0.04));
  CHECK_THROWS_AS(verify_smoothing_drift(standard_normal(1), t, 1.0, 10, 0.1, 2), InputError);
}

TEST_CASE("single-step discretization validates its step") {
  CHECK_THROWS_AS(verify_single_step_discretization(standard_normal(1), 1.0, 0.0, 10, 0.1, 1), InputError);
  CHECK_THROWS_AS(verify_single_step_discretization(standard_normal(1), 1.0, 1.0, 10, 0.1, 1), InputError);
  CHECK_THROWS_AS(verify_single_step_discretization(standard_normal(1), 1e-14, 0.5, 10, 0.1, 1),
                  InputError);
  const auto r = verify_single_step_discretization(two_gaussian(0.5, 0.01), 0.1, 0.25, 2000, 0.1, 1);
  CHECK(r.empirical_constant > 0.0);
  CHECK(r.empirical_constant < 10.0);
}

TEST_CASE("verifier reports are reproducible across thread counts") {
  const Mixture q0 = two_gaussian(0.5, 0.05);
  const auto saved = thread_count();
  set_thread_count(1);
  const auto a = verify_single_step_discretization(q0, 0.5, 0.25, 1500, 0.1, 77);
  const auto b = verify_local_lipschitz(q0, 0.05, 1.0, 1500, 0.1, 77);
  set_thread_count(4);
  const auto c = verify_single_step_discretization(q0, 0.5, 0.25, 1500, 0.1, 77);
  const auto d = verify_local_lipschitz(q0, 0.05, 1.0, 1500, 0.1, 77);
  set_thread_count(saved);
  CHECK(a.empirical_quantile == c.empirical_quantile);
  CHECK(b.empirical_quantile == d.empirical_quantile);
  CHECK(a.seed == 77);

  const nlohmann::json j = a;
  CHECK(j["lemma_id"] == "single_score_discretization_bound");
  CHECK(j["trials"] == 1500);
}

TEST_CASE("pathwise functional matches the stationary Gaussian oracle") {
  // For q0 = N(0, 1) every marginal is N(0, 1) and s_t(x) = -x, so each term is
  // E|X_top - X_t|^2 = 2 (1 - e^{-u}) at lag u, integrated by the trapezoid rule.
  const Schedule schedule = constant_schedule(1.0, 0.1, 6);
  const std::size_t substeps = 8;
  double expected = 0.0;
  for (std::size_t k = 0; k < schedule.steps(); ++k) {
    const double h = schedule.step(k);
    const double du = h / substeps;
    for (std::size_t j = 0; j < substeps; ++j) {
      const double f0 = 2.0 * (1.0 - std::exp(-(h - j * du)));
      const double f1 = 2.0 * (1.0 - std::exp(-(h - (j + 1) * du)));
      expected += 0.5 * (f0 + f1) * du;
    }
  }
  const auto est = pathwise_discretization_functional(standard_normal(1), schedule, 20000, substeps, 4);
  CHECK(std::abs(est.mean - expected) < 4.0 * est.standard_error);
  CHECK(est.standard_error > 0.0);
  CHECK_THROWS_AS(pathwise_discretization_functional(standard_normal(1), schedule, 1, 4, 0), InputError);
}
