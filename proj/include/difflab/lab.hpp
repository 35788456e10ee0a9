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
#include "difflab/table.hpp"

namespace difflab {

/// Bumped whenever a rows.csv schema changes incompatibly.
inline constexpr int kFormatVersion = 1;

enum class Experiment { schedule_compare, hard_instance, verify_lemmas, girsanov_budget, sample };

std::string to_string(Experiment e);
/// Accepts both snake_case and kebab-case names. Throws ConfigError.
Experiment experiment_from_string(const std::string& name);

struct ScheduleParams {
  ScheduleKind kind = ScheduleKind::adaptive;
  double T = 1.0;
  double gamma = 0.02;
  std::size_t N = 100;
  std::vector<std::size_t> sweep;
};

struct SamplerParams {
  std::size_t n = 20000;
  Init init = Init::exact_qT;
};

struct EstimationParams {
  double delta = 0.01;
  std::size_t m = 100;
  std::vector<std::size_t> m_sweep;
  std::size_t n_eval = 10000;
  std::size_t trials = 200;
  /// A round fails when its error exceeds this value.
  double threshold = 0.0;
};

struct LemmaParams {
  /// "gaussian" or "full".
  std::string catalog = "full";
  std::size_t trials = 4000;
  double delta = 0.1;
  double ceiling = 10.0;
};

struct GirsanovParams {
  std::size_t n_paths = 2000;
  std::size_t substeps = 16;
};

/// Fully resolved experiment configuration. `mixture` holds a normalized
/// spec (preset name plus all its parameters, or explicit components) and is
/// turned into a Mixture by resolve_mixture at run time.
struct ExperimentConfig {
  Experiment experiment = Experiment::schedule_compare;
  nlohmann::json mixture;
  ScheduleParams schedule;
  SamplerParams sampler;
  EstimationParams estimation;
  LemmaParams lemmas;
  GirsanovParams girsanov;
  std::uint64_t seed = 0;
  std::string output_dir = "runs";
};

ExperimentConfig default_config(Experiment e);

/// Overlays a raw config (parsed TOML or JSON) on the experiment defaults and
/// validates every range. When `experiment` is given it must agree with any
/// "experiment" key in `raw`. Throws ConfigError before any computation.
ExperimentConfig resolve_config(const nlohmann::json& raw,
                                std::optional<Experiment> experiment = std::nullopt);

void to_json(nlohmann::json& j, const ExperimentConfig& c);

/// Presets: "standard_normal" {dim}, "single_gaussian" {rho, dim},
/// "two_gaussian" {R, rho}, "hard_info" {eta, R, sigma, member = p1 | p2},
/// "hard_sm" {S, m, sigma, member = p_hat | p_star}. Anything with
/// "components" is an explicit mixture.
nlohmann::json normalize_mixture_spec(const nlohmann::json& spec);
Mixture resolve_mixture(const nlohmann::json& spec);

struct ExperimentResult {
  explicit ExperimentResult(Table table) : rows(std::move(table)) {}

  Table rows;
  nlohmann::json summary = nlohmann::json::object();
  /// Extra JSON files written next to rows.csv.
  std::vector<std::pair<std::string, nlohmann::json>> artifacts;
  /// False when a policy check failed (verify_lemmas ceiling).
  bool within_policy = true;
};

ExperimentResult cmd_schedule_compare(const ExperimentConfig& config);
ExperimentResult cmd_hard_instance(const ExperimentConfig& config);
ExperimentResult cmd_verify_lemmas(const ExperimentConfig& config);
ExperimentResult cmd_girsanov_budget(const ExperimentConfig& config);
ExperimentResult cmd_sample(const ExperimentConfig& config);
ExperimentResult run_experiment(const ExperimentConfig& config);

struct RunRecord {
  std::filesystem::path directory;
  nlohmann::json manifest;
  ExperimentResult result;
};

/// Runs the experiment and writes rows.csv, manifest.json and any artifacts
/// to <out_root>/<experiment>/<tag or UTC timestamp>/.
RunRecord run_and_write(const ExperimentConfig& config, const std::filesystem::path& out_root,
                        const std::optional<std::string>& tag = std::nullopt);

struct ReplayOutcome {
  bool identical = false;
  std::filesystem::path rows_path;
  std::string replayed_csv;
};

/// Re-runs the config stored in a manifest and compares the result with the
/// recorded rows.csv byte for byte.
ReplayOutcome replay_manifest(const std::filesystem::path& manifest_path);

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace difflab
