#include "difflab/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "difflab/errors.hpp"

namespace difflab {
namespace {

constexpr double kMinVariance = 1e-300;
// exp(x) underflows to zero for x below this boundary.
constexpr double kUnderflow = -745.0;

double log_sum_exp(const std::vector<double>& terms) {
  const double peak = *std::max_element(terms.begin(), terms.end());
  if (!std::isfinite(peak)) return peak;
  double acc = 0.0;
  for (double v : terms) acc += std::exp(v - peak);
  return peak + std::log(acc);
}

void check_point(const Mixture& gmm, const Vector& x) {
  if (x.size() != gmm.dim()) {
    throw InputError("point has dimension " + std::to_string(x.size()) + ", mixture has " +
                     std::to_string(gmm.dim()));
  }
}

// log(w_i) + log N(x; mu_i, v_i I) for every component.
std::vector<double> component_log_terms(const Mixture& gmm, const Vector& x) {
  const double d = gmm.dim();
  std::vector<double> terms;
  terms.reserve(gmm.size());
  for (const auto& c : gmm.components()) {
    const double sq = (x - c.mean).squaredNorm();
    terms.push_back(c.log_weight - 0.5 * sq / c.variance -
                    0.5 * d * std::log(2.0 * std::numbers::pi * c.variance));
  }
  return terms;
}

std::vector<double> normalized(const std::vector<double>& terms) {
  const double lse = log_sum_exp(terms);
  std::vector<double> post(terms.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const double rel = terms[i] - lse;
    post[i] = rel < kUnderflow ? 0.0 : std::exp(rel);
    total += post[i];
  }
  for (double& p : post) p /= total;
  return post;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

double Component::weight() const { return std::exp(log_weight); }

IsotropicGaussianMixture::IsotropicGaussianMixture(int dim, std::vector<Component> components)
    : dim_(dim), components_(std::move(components)) {
  if (dim_ < 1) throw InputError("mixture dimension must be positive");
  if (components_.empty()) throw InputError("mixture needs at least one component");
  std::vector<double> logs;
  for (const auto& c : components_) {
    if (c.mean.size() != dim_) throw InputError("component mean has wrong dimension");
    if (!(c.variance > kMinVariance) || !std::isfinite(c.variance)) {
      throw InputError("component variance must exceed 1e-300 and be finite");
    }
    if (!std::isfinite(c.log_weight)) throw InputError("component weights must be positive");
    if (!c.mean.allFinite()) throw InputError("component mean must be finite");
    logs.push_back(c.log_weight);
  }
  if (std::abs(std::expm1(log_sum_exp(logs))) > 1e-12) {
    throw InputError("mixture weights must sum to 1");
  }
}

IsotropicGaussianMixture IsotropicGaussianMixture::from_weights(
    const std::vector<double>& weights, const std::vector<Vector>& means,
    const std::vector<double>& variances) {
  if (weights.size() != means.size() || weights.size() != variances.size()) {
    throw InputError("weights, means and variances must have equal length");
  }
  if (means.empty()) throw InputError("mixture needs at least one component");
  std::vector<Component> cs;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] > 0.0)) throw InputError("component weights must be positive");
    cs.push_back({std::log(weights[i]), means[i], variances[i]});
  }
  return {static_cast<int>(means.front().size()), std::move(cs)};
}

double IsotropicGaussianMixture::min_variance() const {
  double v = std::numeric_limits<double>::infinity();
  for (const auto& c : components_) v = std::min(v, c.variance);
  return v;
}

double IsotropicGaussianMixture::second_moment() const {
  double m = 0.0;
  for (const auto& c : components_) m += c.weight() * (c.mean.squaredNorm() + dim_ * c.variance);
  return std::sqrt(m);
}

double IsotropicGaussianMixture::mean_1d() const {
  if (dim_ != 1) throw InputError("mean_1d needs a one-dimensional mixture");
  double m = 0.0;
  for (const auto& c : components_) m += c.weight() * c.mean[0];
  return m;
}

double IsotropicGaussianMixture::variance_1d() const {
  const double mu = mean_1d();
  double v = 0.0;
  for (const auto& c : components_) {
    const double dm = c.mean[0] - mu;
    v += c.weight() * (c.variance + dm * dm);
  }
  return v;
}

double log_density(const Mixture& gmm, const Vector& x) {
  check_point(gmm, x);
  return log_sum_exp(component_log_terms(gmm, x));
}

std::vector<double> responsibilities(const Mixture& gmm, const Vector& x) {
  check_point(gmm, x);
  return normalized(component_log_terms(gmm, x));
}

Vector score(const Mixture& gmm, const Vector& x) {
  const auto post = responsibilities(gmm, x);
  Vector s = Vector::Zero(gmm.dim());
  const auto& cs = gmm.components();
  for (std::size_t i = 0; i < cs.size(); ++i) {
    if (post[i] == 0.0) continue;
    s += post[i] * (cs[i].mean - x) / cs[i].variance;
  }
  return s;
}

ScoreEvaluation evaluate(const Mixture& gmm, const Vector& x) {
  check_point(gmm, x);
  const auto terms = component_log_terms(gmm, x);
  const auto post = normalized(terms);
  Vector s = Vector::Zero(gmm.dim());
  const auto& cs = gmm.components();
  for (std::size_t i = 0; i < cs.size(); ++i) {
    if (post[i] != 0.0) s += post[i] * (cs[i].mean - x) / cs[i].variance;
  }
  return {x, std::move(s), log_sum_exp(terms)};
}

Matrix score_jacobian(const Mixture& gmm, const Vector& x) {
  const auto post = responsibilities(gmm, x);
  const int d = gmm.dim();
  const auto& cs = gmm.components();
  Vector s = Vector::Zero(d);
  double curvature = 0.0;
  for (std::size_t i = 0; i < cs.size(); ++i) {
    if (post[i] == 0.0) continue;
    s += post[i] * (cs[i].mean - x) / cs[i].variance;
    curvature += post[i] / cs[i].variance;
  }
  // Posterior covariance of the per-component scores, accumulated around s so
  // the PSD term stays PSD under rounding.
  Matrix j = -curvature * Matrix::Identity(d, d);
  for (std::size_t i = 0; i < cs.size(); ++i) {
    if (post[i] == 0.0) continue;
    const Vector a = (cs[i].mean - x) / cs[i].variance - s;
    j.noalias() += post[i] * a * a.transpose();
  }
  return 0.5 * (j + j.transpose());
}

double density_1d(const Mixture& gmm, double x) {
  if (gmm.dim() != 1) throw InputError("density_1d needs a 1-d mixture");
  return std::exp(log_density(gmm, Vector::Constant(1, x)));
}

double cdf_1d(const Mixture& gmm, double x) {
  if (gmm.dim() != 1) throw InputError("cdf_1d needs a 1-d mixture");
  double f = 0.0;
  for (const auto& c : gmm.components()) {
    f += c.weight() * normal_cdf((x - c.mean[0]) / std::sqrt(c.variance));
  }
  return std::clamp(f, 0.0, 1.0);
}

Points sample(const Mixture& gmm, Stream& rng, std::size_t n) {
  if (n < 1) throw InputError("sample count must be at least 1");
  std::vector<double> cumulative;
  double acc = 0.0;
  for (const auto& c : gmm.components()) cumulative.push_back(acc += c.weight());
  Points out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& c = gmm.components()[rng.categorical(cumulative)];
    out.push_back(c.mean + std::sqrt(c.variance) * rng.normal_vector(gmm.dim()));
  }
  return out;
}

Mixture smooth(const Mixture& gmm, double t) {
  if (!(t >= 0.0)) throw InputError("smoothing time must be non-negative");
  if (t == 0.0) return gmm;
  const double scale = std::exp(-t);
  const double noise = -std::expm1(-2.0 * t);
  std::vector<Component> cs = gmm.components();
  for (auto& c : cs) {
    c.mean *= scale;
    c.variance = scale * scale * c.variance + noise;
  }
  return {gmm.dim(), std::move(cs)};
}

Mixture convolve(const Mixture& gmm, double sigma_sq) {
  if (!(sigma_sq >= 0.0)) throw InputError("convolution variance must be non-negative");
  std::vector<Component> cs = gmm.components();
  for (auto& c : cs) c.variance += sigma_sq;
  return {gmm.dim(), std::move(cs)};
}

Mixture standard_normal(int dim) { return {dim, {{0.0, Vector::Zero(dim), 1.0}}}; }

Mixture single_gaussian(double rho, int dim) {
  if (!(rho > 0.0)) throw InputError("rho must be positive");
  return {dim, {{0.0, Vector::Zero(dim), rho * rho}}};
}

Mixture two_gaussian(double R, double rho) {
  if (!(rho > 0.0)) throw InputError("rho must be positive");
  const double lw = -std::numbers::ln2;
  return {1,
          {{lw, Vector::Constant(1, -R), rho * rho}, {lw, Vector::Constant(1, R), rho * rho}}};
}

void to_json(nlohmann::json& j, const Mixture& gmm) {
  j = nlohmann::json{{"dim", gmm.dim()}, {"components", nlohmann::json::array()}};
  for (const auto& c : gmm.components()) {
    nlohmann::json item{{"w", c.weight()},
                        {"mean", std::vector<double>(c.mean.data(), c.mean.data() + c.mean.size())},
                        {"var", c.variance}};
    // Weights that underflow a double keep their exact value in log form.
    if (c.weight() == 0.0 || c.weight() < 1e-300) item["log_w"] = c.log_weight;
    j["components"].push_back(std::move(item));
  }
}

Mixture mixture_from_json(const nlohmann::json& j) {
  try {
    const int dim = j.at("dim").get<int>();
    std::vector<Component> cs;
    for (const auto& item : j.at("components")) {
      const auto mean = item.at("mean").get<std::vector<double>>();
      Component c;
      c.mean = Eigen::Map<const Vector>(mean.data(), static_cast<Eigen::Index>(mean.size()));
      c.variance = item.at("var").get<double>();
      if (item.contains("log_w")) {
        c.log_weight = item.at("log_w").get<double>();
      } else {
        const double w = item.at("w").get<double>();
        if (!(w > 0.0)) throw InputError("component weights must be positive");
        c.log_weight = std::log(w);
      }
      cs.push_back(std::move(c));
    }
    return {dim, std::move(cs)};
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed mixture JSON: ") + e.what());
  }
}

}  // namespace difflab
