#pragma once

#include <json.hpp>
#include <optional>
#include <span>
#include <string>

#include "difflab/mixture.hpp"

namespace difflab {

enum class DistanceKind { tv_quadrature, tv_binned, w2_empirical_1d, w2_gaussian_exact };

std::string to_string(DistanceKind kind);

struct DistanceEstimate {
  DistanceKind kind;
  double value = 0.0;
  std::optional<double> standard_error;
};

void to_json(nlohmann::json& j, const DistanceEstimate& e);

/// 1/2 int |p - q| by adaptive Simpson over the union of 12-sd component
/// supports, split at component centres, absolute tolerance 1e-8.
DistanceEstimate tv_quadrature_1d(const Mixture& p, const Mixture& q);

/// Quantile-coupling W2 between equal-size 1-d samples.
DistanceEstimate w2_empirical_1d(std::span<const double> a, std::span<const double> b);
DistanceEstimate w2_empirical_1d(const Points& a, const Points& b);

double w2_gaussian_exact(double var_a, double var_b, double mean_a, double mean_b);

/// 1/2 sum |empirical - analytic| mass over `bins` bins of equal analytic
/// mass covering the 10-sd support of p; outer bins absorb the tails.
DistanceEstimate tv_binned(std::span<const double> samples, const Mixture& p, std::size_t bins);
DistanceEstimate tv_binned(const Points& samples, const Mixture& p, std::size_t bins);

struct EndpointBounds {
  double w2_bound;
  double tv_bound;
};

/// W2(q, q_gamma) <= gamma m2 + sqrt(2 gamma) and TV(q_T, N(0, I)) <= e^{-T} m2.
EndpointBounds endpoint_bounds(const Mixture& q0, double gamma, double T);

/// First coordinates of 1-d points.
std::vector<double> coordinates(const Points& points);

}  // namespace difflab
