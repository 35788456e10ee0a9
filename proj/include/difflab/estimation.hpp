#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "difflab/mixture.hpp"
#include "difflab/sampler.hpp"
#include "difflab/schedule.hpp"

namespace difflab {

/// x = scale * y + z with z ~ N(0, sigma_sq I). For the forward process
/// scale = e^{-t} and sigma_sq = 1 - e^{-2t}; instances built directly in
/// smoothed coordinates use scale = 1 and carry no diffusion time.
struct NoiseChannel {
  double scale = 1.0;
  double sigma_sq = 1.0;
  std::optional<double> t;

  static NoiseChannel at_time(double t);
  static NoiseChannel direct(double sigma_sq);

  /// Time argument handed to score models.
  double model_time() const { return t.value_or(0.0); }
  bool same_as(const NoiseChannel& other) const;
};

struct PairedSample {
  Vector y;
  Vector z;
  Vector x;
  NoiseChannel channel;
};

using Batch = std::vector<PairedSample>;

/// m triples with y ~ q0 and z ~ N(0, sigma_t^2 I) at diffusion time t.
Batch paired_batch(const Mixture& q0, double t, std::size_t m, Stream& rng);

/// m triples whose x follows the mixture p exactly: each component variance
/// v_i is split as (v_i - sigma_sq) in y and sigma_sq in z.
Batch paired_batch_smoothed(const Mixture& p, double sigma_sq, std::size_t m, Stream& rng);

/// (1/m) sum |s(x_i) + z_i / sigma^2|^2.
double score_matching_loss(const ScoreModel& model, const Batch& batch);

/// Excess loss |s - s*|^2 + 2 <s - s*, s* + z / sigma^2> at one sample.
double l_prime(const ScoreModel& model, const ScoreModel& true_score, const PairedSample& sample);

struct Hypothesis {
  std::string label;
  ScoreModelPtr model;
};

class HypothesisClass {
 public:
  explicit HypothesisClass(std::vector<Hypothesis> members);
  const std::vector<Hypothesis>& members() const noexcept { return members_; }
  const Hypothesis& find(const std::string& label) const;

 private:
  std::vector<Hypothesis> members_;
};

struct ErmResult {
  std::string label;
  std::vector<std::pair<std::string, double>> losses;
};

/// Minimizer of the empirical loss over the class; ties go to the
/// lexicographically smallest label.
ErmResult erm(const HypothesisClass& cls, const Batch& batch);

struct ErrorReport {
  double l2_sq = 0.0;
  double quantile_eps = 0.0;
  double delta = 0.0;
  std::size_t n_eval = 0;
};

/// L2 and (1 - delta)-quantile error of f against g under x ~ p, with f and g
/// evaluated at time t.
ErrorReport error_report(const ScoreModel& f, const ScoreModel& g, const Mixture& p, double delta,
                         std::size_t n_eval, Stream& rng, double t = 0.0);

/// sum_k h_k E_{x ~ q_{t_k}} |s_{t_k}(x) - model(t_k, x)|^2 with n_paths
/// fresh draws per schedule time.
double girsanov_kl_functional(const Schedule& schedule, const ScoreModel& model, const Mixture& q0,
                              std::size_t n_paths, std::uint64_t seed);

struct InfoTheoreticPair {
  Mixture p1;
  Mixture p2;
  ScoreModelPtr s1;
  ScoreModelPtr s2;
};

/// p1 = (1 - eta) N(0, sigma^2) + eta N(-R, sigma^2) and its mirror p2.
InfoTheoreticPair build_info_theoretic_pair(double eta, double R, double sigma);

struct LowerBoundInstance {
  Mixture p_star;
  ScoreModelPtr s_star;
  Mixture p_hat;
  ScoreModelPtr s_hat;
  double log_eta;
};

/// p* = N(0, sigma^2) against p_hat = eta N(0, sigma^2) + (1 - eta) N(S, sigma^2)
/// with eta = S exp(-S^2/2 + 10 sqrt(log m) S) / (10 sqrt(log m)), evaluated in
/// log space.
LowerBoundInstance build_score_matching_lower_bound_instance(double S, std::size_t m,
                                                             double sigma = 1.0);

void to_json(nlohmann::json& j, const ErrorReport& r);
void to_json(nlohmann::json& j, const ErmResult& r);

/// Columns y_0.., z_0.., x_0.., t.
void write_batch_csv(const Batch& batch, const std::filesystem::path& path);

}  // namespace difflab
