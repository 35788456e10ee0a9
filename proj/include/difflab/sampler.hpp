#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "difflab/mixture.hpp"
#include "difflab/schedule.hpp"
#include "difflab/table.hpp"

namespace difflab {

/// Maps (time t, point x) to an estimate of grad log q_t(x).
/// Implementations must be deterministic and safe for concurrent calls.
class ScoreModel {
 public:
  virtual ~ScoreModel() = default;
  virtual Vector evaluate(double t, const Vector& x) const = 0;
  virtual std::string descriptor() const = 0;
  virtual int dim() const = 0;
};

using ScoreModelPtr = std::shared_ptr<const ScoreModel>;

/// Exact score of smooth(q0, t).
class AnalyticScore final : public ScoreModel {
 public:
  explicit AnalyticScore(Mixture q0);
  Vector evaluate(double t, const Vector& x) const override;
  std::string descriptor() const override;
  int dim() const override { return q0_.dim(); }
  const Mixture& base() const noexcept { return q0_; }

 private:
  Mixture q0_;
};

/// Score of one fixed mixture, independent of t. Used for hypotheses built
/// directly in smoothed coordinates.
class MixtureScore final : public ScoreModel {
 public:
  MixtureScore(Mixture law, std::string label);
  Vector evaluate(double t, const Vector& x) const override;
  std::string descriptor() const override { return label_; }
  int dim() const override { return law_.dim(); }
  const Mixture& law() const noexcept { return law_; }

 private:
  Mixture law_;
  std::string label_;
};

/// Base score plus a deterministic perturbation delta(t, x).
class CorruptedScore final : public ScoreModel {
 public:
  using Perturbation = std::function<Vector(double t, const Vector& x)>;

  CorruptedScore(ScoreModelPtr base, Perturbation perturbation, std::string label);

  /// Adds the constant vector `bias` everywhere.
  static std::shared_ptr<CorruptedScore> constant_bias(ScoreModelPtr base, const Vector& bias);
  /// Adds magnitude / sigma_t along `direction` whenever t < cutoff.
  static std::shared_ptr<CorruptedScore> low_time_error(ScoreModelPtr base, double cutoff,
                                                        double magnitude);

  Vector evaluate(double t, const Vector& x) const override;
  std::string descriptor() const override;
  int dim() const override { return base_->dim(); }

 private:
  ScoreModelPtr base_;
  Perturbation perturbation_;
  std::string label_;
};

struct StepResult {
  Vector mean;
  double noise_std;
};

/// Exact solution of dX = (X + 2 s) dtau + sqrt(2) dB over duration h with s
/// frozen: mean = e^h x + 2 (e^h - 1) s, std = sqrt(e^{2h} - 1).
StepResult ddpm_step(const Vector& x, const Vector& s_hat, double h);

enum class Init { standard_normal, exact_qT };

std::string to_string(Init init);
Init init_from_string(const std::string& name);

struct TraceRow {
  double t = 0.0;
  double mean_norm = 0.0;
  double score_norm_q50 = 0.0;
  double score_norm_q90 = 0.0;
  double score_norm_q99 = 0.0;
};

struct SamplerOptions {
  std::size_t n = 1;
  std::uint64_t seed = 0;
  Init init = Init::standard_normal;
  /// Required for Init::exact_qT.
  std::optional<Mixture> q0;
  bool record_trace = false;
};

struct SamplerOutput {
  Points samples;
  std::vector<TraceRow> trace;
  Schedule schedule;
  std::uint64_t seed = 0;
  std::string model_descriptor;

  double terminal_time() const { return schedule.terminal_time(); }
};

/// Runs the discretized reverse process from t_0 = T down to t_N. Paths are
/// grouped in fixed blocks with their own substreams, so output is bitwise
/// identical for any thread count.
SamplerOutput run_sampler(const Schedule& schedule, const ScoreModel& model,
                          const SamplerOptions& options);

/// Samples rescaled by e^{t_N}.
Points terminal_unsmoothing_scale(const SamplerOutput& output);

/// Columns x_0..x_{d-1}, one row per sample.
Table samples_table(const Points& samples);

/// Schedule, model descriptor, seed, n and terminal time.
nlohmann::json sampler_sidecar(const SamplerOutput& output);

/// rows CSV (x_0..x_{d-1}) and a JSON sidecar next to it.
void write_sampler_output(const SamplerOutput& output, const std::filesystem::path& csv_path);

}  // namespace difflab
