#pragma once

#include <json.hpp>
#include <vector>

#include "difflab/rng.hpp"
#include "difflab/types.hpp"

namespace difflab {

/// One isotropic component w * N(mean, variance * I). The weight is held in
/// log form so hardness instances can carry weights far below exp(-745).
struct Component {
  double log_weight = 0.0;
  Vector mean;
  double variance = 1.0;

  double weight() const;
};

/// A finite mixture of isotropic Gaussians in R^dim.
///
/// Invariants, checked at construction: at least one component; every mean
/// has length dim; variances exceed 1e-300; log weights are finite and the
/// weights sum to one within 1e-12.
class IsotropicGaussianMixture {
 public:
  IsotropicGaussianMixture(int dim, std::vector<Component> components);

  /// Builds from plain weights (must be > 0 and sum to 1).
  static IsotropicGaussianMixture from_weights(const std::vector<double>& weights,
                                               const std::vector<Vector>& means,
                                               const std::vector<double>& variances);

  int dim() const noexcept { return dim_; }
  const std::vector<Component>& components() const noexcept { return components_; }
  std::size_t size() const noexcept { return components_.size(); }

  double min_variance() const;
  /// Root second moment: sqrt(sum_i w_i (|mu_i|^2 + d rho_i^2)).
  double second_moment() const;
  /// Overall mean and per-coordinate variance of a 1-d mixture.
  double mean_1d() const;
  double variance_1d() const;

 private:
  int dim_;
  std::vector<Component> components_;
};

using Mixture = IsotropicGaussianMixture;

/// Point, gradient of the log density there, and the log density itself.
struct ScoreEvaluation {
  Vector point;
  Vector score;
  double log_density;
};

double log_density(const Mixture& gmm, const Vector& x);
Vector score(const Mixture& gmm, const Vector& x);
ScoreEvaluation evaluate(const Mixture& gmm, const Vector& x);

/// Hessian of the log density. Symmetric; bounded below by -I / min variance.
Matrix score_jacobian(const Mixture& gmm, const Vector& x);

/// Posterior component probabilities at x, clamped at the exp(-745)
/// underflow boundary and renormalized.
std::vector<double> responsibilities(const Mixture& gmm, const Vector& x);

/// Density and CDF for 1-d mixtures.
double density_1d(const Mixture& gmm, double x);
double cdf_1d(const Mixture& gmm, double x);

Points sample(const Mixture& gmm, Stream& rng, std::size_t n);

/// Law of e^{-t} X + N(0, (1 - e^{-2t}) I) for X ~ gmm.
Mixture smooth(const Mixture& gmm, double t);

/// Convolution with N(0, sigma_sq I) and no rescaling.
Mixture convolve(const Mixture& gmm, double sigma_sq);

// Presets.
Mixture standard_normal(int dim);
Mixture single_gaussian(double rho, int dim = 1);
/// 1/2 N(-R, rho^2) + 1/2 N(R, rho^2).
Mixture two_gaussian(double R, double rho);

void to_json(nlohmann::json& j, const Mixture& gmm);
Mixture mixture_from_json(const nlohmann::json& j);

}  // namespace difflab
