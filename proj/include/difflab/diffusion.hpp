#pragma once

#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

#include "difflab/mixture.hpp"
#include "difflab/rng.hpp"

namespace difflab {

class Schedule;

/// sigma_t^2 = 1 - e^{-2t}, the noise variance of the forward channel.
double sigma_sq(double t);

/// Time t whose noise variance equals s2 (inverse of sigma_sq).
double time_for_sigma_sq(double s2);

struct NoiseLevel {
  double t;
  double sigma_sq;

  static NoiseLevel at(double t);
};

struct ForwardPath {
  std::vector<double> times;
  Points states;
  std::uint64_t seed = 0;
};

/// Result of one lemma verifier: the (1 - delta) empirical quantile of the
/// lemma's statistic and its ratio to the bound evaluated with constant 1.
struct LemmaReport {
  std::string lemma_id;
  std::size_t trials = 0;
  double delta = 0.0;
  double empirical_quantile = 0.0;
  double bound_form = 0.0;
  double empirical_constant = 0.0;
  std::uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const LemmaReport& r);

/// Order statistic at 1-based index ceil((1 - delta) n), clamped to [1, n].
double upper_quantile(std::vector<double> values, double delta);

/// Draws x_0 ~ q0 and pushes it through the exact OU channel to time t.
Points forward_marginal_sample(const Mixture& q0, double t, Stream& rng, std::size_t n);

/// One path on a uniform grid of grid_steps cells over [t_lo, t_hi], using
/// exact OU transitions between grid points.
ForwardPath simulate_forward_path(const Mixture& q0, double t_lo, double t_hi,
                                  std::size_t grid_steps, Stream& rng);

// Lemma verifiers. Each trial draws from substream (seed, lemma, trial), so
// reports are bitwise reproducible for any thread count.

/// max over t in [t_k - h, t_k] of |e^{t_k - t} X_{t_k} - X_t|^2 against
/// h (d + log 1/delta), on a 64-point grid.
LemmaReport verify_max_deviation(const Mixture& q0, double t_k, double h, std::size_t trials,
                                 double delta, std::uint64_t seed);

/// |s_t(x)|^2 for x ~ q_t against (d + log 1/delta) / sigma_t^2.
LemmaReport verify_score_norm_subgaussian(const Mixture& q0, double t, std::size_t trials,
                                          double delta, std::uint64_t seed);

/// Spectral norm of the score Jacobian at a point perturbed inside the ball
/// of radius radius_scale * sigma_t / sqrt(d + log 1/delta), against
/// (d + log 1/delta) / sigma_t^2.
LemmaReport verify_local_lipschitz(const Mixture& q0, double t, double radius_scale,
                                   std::size_t trials, double delta, std::uint64_t seed);

/// |s_{t_k}(x) - s_{t'}(x)|^2 where sigma_{t'} = (1 - eta) sigma_{t_k}, against
/// (eta^2 / sigma^2)(d + log 1/(eta delta))^3.
LemmaReport verify_smoothing_drift(const Mixture& q0, double t_k, double eta, std::size_t trials,
                                   double delta, std::uint64_t seed);

/// max over a 16-point grid on [t_k - h_k, t_k] of |s_{t_k}(X_{t_k}) - s_t(X_t)|^2
/// with h_k = eps sigma_{t_k}^2 / (d + log 1/delta)^3, against eps / sigma_{t_k}^2.
LemmaReport verify_single_step_discretization(const Mixture& q0, double t_k, double epsilon,
                                              std::size_t trials, double delta,
                                              std::uint64_t seed);

/// Spectral norm of a symmetric matrix by power iteration (200 iterations,
/// 1e-8 relative tolerance, start e_1 + 1e-3).
double spectral_norm(const Matrix& m);

struct FunctionalEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
};

/// Monte Carlo estimate of sum_k int_{t_{k+1}}^{t_k} |s_{t_k}(X_{t_k}) - s_t(X_t)|^2 dt
/// along exact forward paths, trapezoid rule on `substeps` cells per step.
FunctionalEstimate pathwise_discretization_functional(const Mixture& q0, const Schedule& schedule,
                                                      std::size_t n_paths, std::size_t substeps,
                                                      std::uint64_t seed);

}  // namespace difflab
