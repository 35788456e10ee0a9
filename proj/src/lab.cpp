#include "difflab/lab.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "difflab/diffusion.hpp"
#include "difflab/errors.hpp"
#include "difflab/estimation.hpp"
#include "difflab/metrics.hpp"
#include "difflab/parallel.hpp"
#include "difflab/rng.hpp"

#ifndef DIFFLAB_VERSION
#define DIFFLAB_VERSION "unknown"
#endif

namespace difflab {
namespace {

using nlohmann::json;

constexpr std::size_t kTvBins = 64;

// ---------------------------------------------------------------- config IO

void reject_unknown_keys(const json& obj, const std::set<std::string>& known, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be a table");
  for (const auto& [key, value] : obj.items()) {
    if (!known.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

double read_double(const json& obj, const std::string& key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError("'" + key + "' must be a number");
  return v.get<double>();
}

std::size_t to_size(const json& v, const std::string& key) {
  if (v.is_number_unsigned()) return v.get<std::size_t>();
  if (v.is_number_integer()) {
    const auto i = v.get<long long>();
    if (i < 0) throw ConfigError("'" + key + "' must be non-negative");
    return static_cast<std::size_t>(i);
  }
  throw ConfigError("'" + key + "' must be an integer");
}

std::size_t read_size(const json& obj, const std::string& key, std::size_t fallback) {
  return obj.contains(key) ? to_size(obj.at(key), key) : fallback;
}

std::vector<std::size_t> read_sizes(const json& obj, const std::string& key,
                                    std::vector<std::size_t> fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_array()) throw ConfigError("'" + key + "' must be an array of integers");
  std::vector<std::size_t> out;
  for (const auto& e : v) out.push_back(to_size(e, key));
  return out;
}

std::string read_string(const json& obj, const std::string& key, std::string fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) throw ConfigError("'" + key + "' must be a string");
  return v.get<std::string>();
}

const json& section(const json& raw, const std::string& key) {
  static const json empty = json::object();
  return raw.contains(key) ? raw.at(key) : empty;
}

// Presets and their defaults; explicit values override.
const std::map<std::string, json>& preset_defaults() {
  static const std::map<std::string, json> table{
      {"standard_normal", {{"dim", 1}}},
      {"single_gaussian", {{"rho", 0.5}, {"dim", 1}}},
      {"two_gaussian", {{"R", 0.5}, {"rho", 0.01}}},
      {"hard_info", {{"eta", 0.001}, {"R", 10000.0}, {"sigma", 1.0}, {"member", "p1"}}},
      {"hard_sm", {{"S", 80.0}, {"m", 10000}, {"sigma", 1.0}, {"member", "p_hat"}}},
  };
  return table;
}

json default_mixture(Experiment e) {
  return normalize_mixture_spec(e == Experiment::hard_instance ? "hard_info" : "two_gaussian");
}

void validate_schedule(ScheduleKind kind, double T, double gamma, std::size_t N) {
  try {
    make_schedule(kind, T, gamma, N);
  } catch (const std::exception& e) {
    throw ConfigError("schedule (" + to_string(kind) + ", T = " + format_double(T) +
                      ", gamma = " + format_double(gamma) + ", N = " + std::to_string(N) +
                      ") is invalid: " + e.what());
  }
}

void validate(const ExperimentConfig& c) {
  const auto& s = c.schedule;
  if (!(std::isfinite(s.T) && s.T > 0.0)) throw ConfigError("schedule.T must be positive");
  if (!(s.gamma > 0.0 && s.gamma < 1.0)) throw ConfigError("schedule.gamma must lie in (0, 1)");
  if (s.N < 1) throw ConfigError("schedule.N must be at least 1");
  for (std::size_t n : s.sweep) {
    if (n < 1) throw ConfigError("schedule.sweep entries must be at least 1");
  }
  const auto& e = c.estimation;
  if (!(e.delta > 0.0 && e.delta < 1.0)) throw ConfigError("estimation.delta must lie in (0, 1)");
  if (static_cast<double>(e.n_eval) < std::ceil(10.0 / e.delta - 1e-9)) {
    throw ConfigError("estimation.n_eval must be at least ceil(10 / delta)");
  }
  if (e.m < 1) throw ConfigError("estimation.m must be at least 1");
  for (std::size_t m : e.m_sweep) {
    if (m < 1) throw ConfigError("estimation.m_sweep entries must be at least 1");
  }
  if (e.trials < 1) throw ConfigError("estimation.trials must be at least 1");
  if (!(e.threshold >= 0.0)) throw ConfigError("estimation.threshold must be non-negative");
  if (c.sampler.n < 1) throw ConfigError("sampler.n must be at least 1");
  const auto& l = c.lemmas;
  if (l.catalog != "gaussian" && l.catalog != "full") {
    throw ConfigError("lemmas.catalog must be 'gaussian' or 'full'");
  }
  if (l.trials < 1) throw ConfigError("lemmas.trials must be at least 1");
  if (!(l.delta > 0.0 && l.delta < 1.0)) throw ConfigError("lemmas.delta must lie in (0, 1)");
  if (!(l.ceiling >= 0.0)) throw ConfigError("lemmas.ceiling must be non-negative");
  if (c.girsanov.n_paths < 2) throw ConfigError("girsanov.n_paths must be at least 2");
  if (c.girsanov.substeps < 1) throw ConfigError("girsanov.substeps must be at least 1");

  switch (c.experiment) {
    case Experiment::schedule_compare:
    case Experiment::girsanov_budget:
      if (s.sweep.empty()) throw ConfigError("schedule.sweep must not be empty");
      for (std::size_t n : s.sweep) validate_schedule(ScheduleKind::adaptive, s.T, s.gamma, n);
      if (resolve_mixture(c.mixture).dim() != 1) throw ConfigError("experiment needs a 1-d mixture");
      break;
    case Experiment::hard_instance:
      if (e.m_sweep.empty()) throw ConfigError("estimation.m_sweep must not be empty");
      if (c.mixture.value("preset", "") != "hard_info") {
        throw ConfigError("hard_instance needs the hard_info mixture preset");
      }
      break;
    case Experiment::sample:
      validate_schedule(s.kind, s.T, s.gamma, s.N);
      break;
    case Experiment::verify_lemmas:
      break;
  }
}

// ---------------------------------------------------------------- helpers

std::string utc_stamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

std::string params_string(std::initializer_list<std::pair<const char*, double>> params) {
  std::string out;
  for (const auto& [name, value] : params) {
    if (!out.empty()) out += ';';
    out += std::string(name) + "=" + format_double(value);
  }
  return out;
}

std::vector<std::pair<std::string, Mixture>> lemma_catalog(const std::string& name) {
  std::vector<std::pair<std::string, Mixture>> out{
      {"standard_normal_1d", standard_normal(1)},
      {"single_gaussian_rho0.1", single_gaussian(0.1)},
      {"single_gaussian_rho0.5", single_gaussian(0.5)},
      {"standard_normal_2d", standard_normal(2)},
  };
  if (name == "full") {
    out.emplace_back("two_gaussian_R0.5_rho0.01", two_gaussian(0.5, 0.01));
    Vector a(2), b(2), c(2);
    a << -1.0, 0.0;
    b << 1.0, 0.5;
    c << 0.0, -1.5;
    out.emplace_back("three_component_2d",
                     Mixture::from_weights({0.5, 0.3, 0.2}, {a, b, c}, {0.04, 0.01, 0.09}));
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------- names

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::schedule_compare:
      return "schedule_compare";
    case Experiment::hard_instance:
      return "hard_instance";
    case Experiment::verify_lemmas:
      return "verify_lemmas";
    case Experiment::girsanov_budget:
      return "girsanov_budget";
    case Experiment::sample:
      return "sample";
  }
  return "unknown";
}

Experiment experiment_from_string(const std::string& name) {
  std::string key = name;
  std::replace(key.begin(), key.end(), '-', '_');
  for (auto e : {Experiment::schedule_compare, Experiment::hard_instance, Experiment::verify_lemmas,
                 Experiment::girsanov_budget, Experiment::sample}) {
    if (to_string(e) == key) return e;
  }
  throw ConfigError("unknown experiment '" + name + "'");
}

// ---------------------------------------------------------------- mixtures

json normalize_mixture_spec(const json& spec) {
  if (spec.is_string()) return normalize_mixture_spec(json{{"preset", spec.get<std::string>()}});
  if (!spec.is_object()) throw ConfigError("mixture must be a preset name or a table");
  if (spec.contains("components")) {
    reject_unknown_keys(spec, {"dim", "components"}, "mixture");
    try {
      mixture_from_json(spec);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("invalid mixture: ") + e.what());
    }
    return spec;
  }
  const std::string name = read_string(spec, "preset", "");
  const auto& presets = preset_defaults();
  const auto it = presets.find(name);
  if (it == presets.end()) throw ConfigError("unknown mixture preset '" + name + "'");
  json out = it->second;
  for (const auto& [key, value] : spec.items()) {
    if (key == "preset") continue;
    if (!out.contains(key)) throw ConfigError("unknown key '" + key + "' for preset " + name);
    if (out[key].is_string() != value.is_string()) {
      throw ConfigError("wrong type for '" + key + "' in preset " + name);
    }
    out[key] = value;
  }
  out["preset"] = name;
  try {
    resolve_mixture(out);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("invalid " + name + " preset: " + e.what());
  }
  return out;
}

Mixture resolve_mixture(const json& spec) {
  if (spec.contains("components")) return mixture_from_json(spec);
  const std::string name = spec.at("preset").get<std::string>();
  if (name == "standard_normal") return standard_normal(static_cast<int>(to_size(spec.at("dim"), "dim")));
  if (name == "single_gaussian") {
    return single_gaussian(spec.at("rho").get<double>(), static_cast<int>(to_size(spec.at("dim"), "dim")));
  }
  if (name == "two_gaussian") return two_gaussian(spec.at("R").get<double>(), spec.at("rho").get<double>());
  if (name == "hard_info") {
    auto pair = build_info_theoretic_pair(spec.at("eta").get<double>(), spec.at("R").get<double>(),
                                          spec.at("sigma").get<double>());
    const std::string member = spec.at("member").get<std::string>();
    if (member == "p1") return pair.p1;
    if (member == "p2") return pair.p2;
    throw ConfigError("hard_info member must be p1 or p2");
  }
  if (name == "hard_sm") {
    auto inst = build_score_matching_lower_bound_instance(
        spec.at("S").get<double>(), to_size(spec.at("m"), "m"), spec.at("sigma").get<double>());
    const std::string member = spec.at("member").get<std::string>();
    if (member == "p_hat") return inst.p_hat;
    if (member == "p_star") return inst.p_star;
    throw ConfigError("hard_sm member must be p_hat or p_star");
  }
  throw ConfigError("unknown mixture preset '" + name + "'");
}

// ---------------------------------------------------------------- config

ExperimentConfig default_config(Experiment e) {
  ExperimentConfig c;
  c.experiment = e;
  c.mixture = default_mixture(e);
  c.schedule.sweep = {10, 20, 50, 100, 200};
  c.estimation.m_sweep = {10, 50, 100, 500, 1000, 5000};
  if (e == Experiment::girsanov_budget) {
    c.schedule.T = 3.0;
    c.schedule.gamma = 0.01;
    c.schedule.N = 400;
    c.schedule.sweep = {50, 100, 200, 400, 800};
  }
  return c;
}

ExperimentConfig resolve_config(const json& raw, std::optional<Experiment> experiment) {
  if (!raw.is_object()) throw ConfigError("config must be a table");
  reject_unknown_keys(raw,
                      {"experiment", "mixture", "schedule", "sampler", "estimation", "lemmas",
                       "girsanov", "seed", "output_dir"},
                      "config");
  if (raw.contains("experiment")) {
    const Experiment named = experiment_from_string(read_string(raw, "experiment", ""));
    if (experiment && *experiment != named) {
      throw ConfigError("config is for experiment '" + to_string(named) + "', not '" +
                        to_string(*experiment) + "'");
    }
    experiment = named;
  }
  if (!experiment) throw ConfigError("config does not name an experiment");

  ExperimentConfig c = default_config(*experiment);
  if (raw.contains("mixture")) c.mixture = normalize_mixture_spec(raw.at("mixture"));

  const json& s = section(raw, "schedule");
  reject_unknown_keys(s, {"kind", "T", "gamma", "N", "sweep"}, "schedule");
  if (s.contains("kind")) {
    try {
      c.schedule.kind = schedule_kind_from_string(read_string(s, "kind", ""));
    } catch (const InputError& e) {
      throw ConfigError(e.what());
    }
  }
  c.schedule.T = read_double(s, "T", c.schedule.T);
  c.schedule.gamma = read_double(s, "gamma", c.schedule.gamma);
  c.schedule.N = read_size(s, "N", c.schedule.N);
  c.schedule.sweep = read_sizes(s, "sweep", c.schedule.sweep);

  const json& sm = section(raw, "sampler");
  reject_unknown_keys(sm, {"n", "init"}, "sampler");
  c.sampler.n = read_size(sm, "n", c.sampler.n);
  if (sm.contains("init")) {
    try {
      c.sampler.init = init_from_string(read_string(sm, "init", ""));
    } catch (const InputError& e) {
      throw ConfigError(e.what());
    }
  }

  const json& es = section(raw, "estimation");
  reject_unknown_keys(es, {"delta", "m", "m_sweep", "n_eval", "trials", "threshold"}, "estimation");
  c.estimation.delta = read_double(es, "delta", c.estimation.delta);
  c.estimation.m = read_size(es, "m", c.estimation.m);
  c.estimation.m_sweep = read_sizes(es, "m_sweep", c.estimation.m_sweep);
  c.estimation.n_eval = read_size(es, "n_eval", c.estimation.n_eval);
  c.estimation.trials = read_size(es, "trials", c.estimation.trials);
  c.estimation.threshold = read_double(es, "threshold", c.estimation.threshold);

  const json& lm = section(raw, "lemmas");
  reject_unknown_keys(lm, {"catalog", "trials", "delta", "ceiling"}, "lemmas");
  c.lemmas.catalog = read_string(lm, "catalog", c.lemmas.catalog);
  c.lemmas.trials = read_size(lm, "trials", c.lemmas.trials);
  c.lemmas.delta = read_double(lm, "delta", c.lemmas.delta);
  c.lemmas.ceiling = read_double(lm, "ceiling", c.lemmas.ceiling);

  const json& gs = section(raw, "girsanov");
  reject_unknown_keys(gs, {"n_paths", "substeps"}, "girsanov");
  c.girsanov.n_paths = read_size(gs, "n_paths", c.girsanov.n_paths);
  c.girsanov.substeps = read_size(gs, "substeps", c.girsanov.substeps);

  if (raw.contains("seed")) {
    const json& v = raw.at("seed");
    if (v.is_number_unsigned()) {
      c.seed = v.get<std::uint64_t>();
    } else if (v.is_number_integer() && v.get<long long>() >= 0) {
      c.seed = static_cast<std::uint64_t>(v.get<long long>());
    } else {
      throw ConfigError("'seed' must be a non-negative integer");
    }
  }
  c.output_dir = read_string(raw, "output_dir", c.output_dir);
  validate(c);
  return c;
}

void to_json(json& j, const ExperimentConfig& c) {
  j = json{{"experiment", to_string(c.experiment)},
           {"mixture", c.mixture},
           {"schedule",
            {{"kind", to_string(c.schedule.kind)},
             {"T", c.schedule.T},
             {"gamma", c.schedule.gamma},
             {"N", c.schedule.N},
             {"sweep", c.schedule.sweep}}},
           {"sampler", {{"n", c.sampler.n}, {"init", to_string(c.sampler.init)}}},
           {"estimation",
            {{"delta", c.estimation.delta},
             {"m", c.estimation.m},
             {"m_sweep", c.estimation.m_sweep},
             {"n_eval", c.estimation.n_eval},
             {"trials", c.estimation.trials},
             {"threshold", c.estimation.threshold}}},
           {"lemmas",
            {{"catalog", c.lemmas.catalog},
             {"trials", c.lemmas.trials},
             {"delta", c.lemmas.delta},
             {"ceiling", c.lemmas.ceiling}}},
           {"girsanov", {{"n_paths", c.girsanov.n_paths}, {"substeps", c.girsanov.substeps}}},
           {"seed", c.seed},
           {"output_dir", c.output_dir}};
}

// ---------------------------------------------------------------- experiments

ExperimentResult cmd_schedule_compare(const ExperimentConfig& c) {
  const Mixture q0 = resolve_mixture(c.mixture);
  if (q0.dim() != 1) throw ConfigError("schedule_compare needs a 1-d mixture");
  const AnalyticScore truth(q0);
  ExperimentResult result{Table({"kind", "N_requested", "steps_realized", "terminal_time", "w2",
                                 "tv_binned", "kl_budget"})};
  std::size_t wins = 0;
  for (std::size_t N : c.schedule.sweep) {
    const Schedule adaptive = adaptive_schedule(c.schedule.T, c.schedule.gamma, N);
    const std::size_t K = adaptive.steps();
    const double t_end = adaptive.terminal_time();
    // Competing schedules share the realized step count and end time.
    const std::vector<Schedule> schedules{adaptive, constant_schedule(c.schedule.T, t_end, K),
                                          linear_schedule(c.schedule.T, t_end, K)};
    const Mixture target = smooth(q0, t_end);
    Stream ref_rng = substream(c.seed, {label_hash("reference"), N});
    const std::vector<double> reference = coordinates(sample(target, ref_rng, c.sampler.n));
    SamplerOptions options;
    options.n = c.sampler.n;
    options.seed = derive_seed(c.seed, {label_hash("sampler"), N});
    options.init = c.sampler.init;
    options.q0 = q0;
    std::vector<double> w2s;
    for (const auto& schedule : schedules) {
      const SamplerOutput out = run_sampler(schedule, truth, options);
      const std::vector<double> xs = coordinates(out.samples);
      const double w2 = w2_empirical_1d(xs, reference).value;
      w2s.push_back(w2);
      result.rows.add_row({to_string(schedule.kind()), static_cast<long long>(N),
                           static_cast<long long>(schedule.steps()), schedule.terminal_time(), w2,
                           tv_binned(xs, target, kTvBins).value, kl_budget(schedule)});
    }
    if (w2s[0] <= w2s[1]) ++wins;
  }
  result.summary = {{"adaptive_not_worse_than_constant", wins},
                    {"sweep_points", c.schedule.sweep.size()}};
  return result;
}

ExperimentResult cmd_hard_instance(const ExperimentConfig& c) {
  if (c.mixture.value("preset", "") != "hard_info") {
    throw ConfigError("hard_instance needs the hard_info mixture preset");
  }
  const double R = c.mixture.at("R").get<double>();
  const double sigma = c.mixture.at("sigma").get<double>();
  const auto pair = build_info_theoretic_pair(c.mixture.at("eta").get<double>(), R, sigma);
  const HypothesisClass cls({{"s1", pair.s1}, {"s2", pair.s2}});
  const auto& est = c.estimation;

  struct Outcome {
    double l2_sq = 0.0;
    double quantile = 0.0;
    bool wrong = false;
    bool outlier = false;
  };
  ExperimentResult result{Table({"m", "trials", "l2_failure_fraction", "quantile_failure_fraction",
                                 "wrong_selection_fraction", "outlier_free_fraction",
                                 "wrong_and_outlier_free_fraction", "mean_l2_sq"})};
  for (std::size_t m : est.m_sweep) {
    std::vector<Outcome> outcomes(est.trials);
    parallel_for(est.trials, [&](std::size_t trial) {
      Stream rng = substream(c.seed, {label_hash("hard_instance"), m, trial});
      // The truth is drawn from the pair, so ERM cannot win by tie-breaking.
      const bool truth_is_p2 = rng.uniform() < 0.5;
      const Mixture& p = truth_is_p2 ? pair.p2 : pair.p1;
      const ScoreModelPtr& truth = truth_is_p2 ? pair.s2 : pair.s1;
      const Batch batch = paired_batch_smoothed(p, sigma * sigma, m, rng);
      const ErmResult chosen = erm(cls, batch);
      const ErrorReport report =
          error_report(*cls.find(chosen.label).model, *truth, p, est.delta, est.n_eval, rng);
      Outcome& o = outcomes[trial];
      o.l2_sq = report.l2_sq;
      o.quantile = report.quantile_eps;
      o.wrong = chosen.label != (truth_is_p2 ? "s2" : "s1");
      o.outlier = std::any_of(batch.begin(), batch.end(),
                              [&](const PairedSample& s) { return std::abs(s.y[0]) > 0.5 * R; });
    });
    double l2_fail = 0, q_fail = 0, wrong = 0, clean = 0, wrong_clean = 0, l2_sum = 0;
    for (const auto& o : outcomes) {
      l2_fail += o.l2_sq > est.threshold;
      q_fail += o.quantile > est.threshold;
      wrong += o.wrong;
      clean += !o.outlier;
      wrong_clean += o.wrong && !o.outlier;
      l2_sum += o.l2_sq;
    }
    const double n = static_cast<double>(est.trials);
    result.rows.add_row({static_cast<long long>(m), static_cast<long long>(est.trials), l2_fail / n,
                         q_fail / n, wrong / n, clean / n, wrong_clean / n, l2_sum / n});
  }
  result.summary = {{"threshold", est.threshold}, {"delta", est.delta}};
  return result;
}

ExperimentResult cmd_verify_lemmas(const ExperimentConfig& c) {
  const auto& l = c.lemmas;
  ExperimentResult result{Table({"lemma_id", "mixture", "params", "trials", "delta",
                                 "empirical_quantile", "bound_form", "empirical_constant", "seed"})};
  double worst = 0.0;
  auto add = [&](const std::string& mixture, const std::string& params, const LemmaReport& r) {
    worst = std::max(worst, r.empirical_constant);
    result.rows.add_row({r.lemma_id, mixture, params, static_cast<long long>(r.trials), r.delta,
                         r.empirical_quantile, r.bound_form, r.empirical_constant,
                         std::to_string(r.seed)});
  };
  for (const auto& [name, q0] : lemma_catalog(l.catalog)) {
    for (double h : {0.01, 0.1}) {
      add(name, params_string({{"t_k", 1.0}, {"h", h}}),
          verify_max_deviation(q0, 1.0, h, l.trials, l.delta, c.seed));
    }
    for (double t : {0.01, 0.1, 1.0}) {
      add(name, params_string({{"t", t}}),
          verify_score_norm_subgaussian(q0, t, l.trials, l.delta, c.seed));
    }
    for (double t : {0.01, 1.0}) {
      add(name, params_string({{"t", t}, {"radius_scale", 1.0}}),
          verify_local_lipschitz(q0, t, 1.0, l.trials, l.delta, c.seed));
    }
    for (double t : {0.1, 0.5}) {
      add(name, params_string({{"t_k", t}, {"eta", 0.01}}),
          verify_smoothing_drift(q0, t, 0.01, l.trials, l.delta, c.seed));
    }
    for (double t : {0.1, 1.0}) {
      add(name, params_string({{"t_k", t}, {"epsilon", 0.25}}),
          verify_single_step_discretization(q0, t, 0.25, l.trials, l.delta, c.seed));
    }
  }
  result.within_policy = worst <= l.ceiling;
  result.summary = {
      {"max_empirical_constant", worst}, {"ceiling", l.ceiling}, {"within_policy", result.within_policy}};
  return result;
}

ExperimentResult cmd_girsanov_budget(const ExperimentConfig& c) {
  const Mixture q0 = resolve_mixture(c.mixture);
  if (q0.dim() != 1) throw ConfigError("girsanov_budget needs a 1-d mixture");
  ExperimentResult result{Table(
      {"N_requested", "steps_realized", "T", "gamma", "functional", "standard_error", "kl_budget"})};
  std::vector<double> ns, values;
  for (std::size_t N : c.schedule.sweep) {
    const Schedule schedule = adaptive_schedule(c.schedule.T, c.schedule.gamma, N);
    const FunctionalEstimate est =
        pathwise_discretization_functional(q0, schedule, c.girsanov.n_paths, c.girsanov.substeps,
                                           derive_seed(c.seed, {label_hash("girsanov_budget"), N}));
    result.rows.add_row({static_cast<long long>(N), static_cast<long long>(schedule.steps()),
                         c.schedule.T, c.schedule.gamma, est.mean, est.standard_error,
                         kl_budget(schedule)});
    ns.push_back(static_cast<double>(N));
    values.push_back(est.mean);
  }
  result.summary = {{"T_plus_log_inv_gamma", c.schedule.T + std::log(1.0 / c.schedule.gamma)}};
  if (ns.size() >= 2) result.summary["loglog_slope"] = loglog_slope(ns, values);
  return result;
}

ExperimentResult cmd_sample(const ExperimentConfig& c) {
  const Mixture q0 = resolve_mixture(c.mixture);
  const Schedule schedule = make_schedule(c.schedule.kind, c.schedule.T, c.schedule.gamma, c.schedule.N);
  const AnalyticScore truth(q0);
  SamplerOptions options;
  options.n = c.sampler.n;
  options.seed = c.seed;
  options.init = c.sampler.init;
  options.q0 = q0;
  const SamplerOutput out = run_sampler(schedule, truth, options);
  ExperimentResult result{samples_table(out.samples)};
  result.summary = {{"n", out.samples.size()},
                    {"steps_realized", schedule.steps()},
                    {"terminal_time", out.terminal_time()}};
  result.artifacts.emplace_back("sampler.json", sampler_sidecar(out));
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& c) {
  switch (c.experiment) {
    case Experiment::schedule_compare:
      return cmd_schedule_compare(c);
    case Experiment::hard_instance:
      return cmd_hard_instance(c);
    case Experiment::verify_lemmas:
      return cmd_verify_lemmas(c);
    case Experiment::girsanov_budget:
      return cmd_girsanov_budget(c);
    case Experiment::sample:
      return cmd_sample(c);
  }
  throw ConfigError("unknown experiment");
}

// ---------------------------------------------------------------- persistence

RunRecord run_and_write(const ExperimentConfig& c, const std::filesystem::path& out_root,
                        const std::optional<std::string>& tag) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentResult result = run_experiment(c);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const std::string stamp = utc_stamp();
  std::filesystem::path dir = out_root / to_string(c.experiment) / tag.value_or(stamp);
  if (!tag) {
    for (int i = 1; std::filesystem::exists(dir); ++i) {
      dir = out_root / to_string(c.experiment) / (stamp + "-" + std::to_string(i));
    }
  }
  std::filesystem::create_directories(dir);
  result.rows.write_csv(dir / "rows.csv");
  for (const auto& [name, content] : result.artifacts) {
    std::ofstream f(dir / name);
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
    f << content.dump(2) << '\n';
  }
  json manifest{{"format_version", kFormatVersion},
                {"artifact_version", DIFFLAB_VERSION},
                {"experiment", to_string(c.experiment)},
                {"seed", c.seed},
                {"config", c},
                {"threads", thread_count()},
                {"wall_time_s", wall},
                {"created_utc", stamp},
                {"rows", "rows.csv"},
                {"columns", result.rows.columns()},
                {"summary", result.summary}};
  std::ofstream f(dir / "manifest.json");
  if (!f) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
  f << manifest.dump(2) << '\n';
  return {dir, std::move(manifest), std::move(result)};
}

ReplayOutcome replay_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream f(manifest_path);
  if (!f) throw ConfigError("cannot read manifest " + manifest_path.string());
  json manifest;
  try {
    manifest = json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError("invalid manifest: " + std::string(e.what()));
  }
  if (manifest.value("format_version", -1) != kFormatVersion) {
    throw ConfigError("manifest format_version does not match this build");
  }
  const ExperimentConfig config = resolve_config(manifest.at("config"));
  ReplayOutcome outcome;
  outcome.rows_path = manifest_path.parent_path() / manifest.value("rows", "rows.csv");
  std::ifstream rows(outcome.rows_path, std::ios::binary);
  if (!rows) throw ConfigError("cannot read " + outcome.rows_path.string());
  std::stringstream recorded;
  recorded << rows.rdbuf();
  outcome.replayed_csv = run_experiment(config).rows.to_csv();
  outcome.identical = outcome.replayed_csv == recorded.str();
  return outcome;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InputError("slope needs two or more points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0)) throw InputError("log-log slope needs positive values");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw InputError("slope needs distinct x values");
  return sxy / sxx;
}

}  // namespace difflab
