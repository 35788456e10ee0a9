// lab: runs the experiment catalog from TOML or JSON configs.
//
//   lab <experiment> [--config file] [--seed n] [--out dir] [--ceiling c]
//                    [--threads k] [--tag name]
//   lab replay --manifest path/to/manifest.json [--threads k]

#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "difflab/config.hpp"
#include "difflab/errors.hpp"
#include "difflab/lab.hpp"
#include "difflab/parallel.hpp"

namespace {

constexpr int kPolicyExit = 3;

struct RunOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> ceiling;
  std::optional<std::size_t> threads;
  std::optional<std::string> tag;
};

int run(difflab::Experiment experiment, const RunOptions& opts) {
  nlohmann::json raw = opts.config.empty() ? nlohmann::json::object()
                                           : difflab::load_config_file(opts.config);
  if (!raw.is_object()) throw difflab::ConfigError("config must be a table");
  if (opts.seed) raw["seed"] = *opts.seed;
  if (opts.out) raw["output_dir"] = *opts.out;
  if (opts.ceiling) raw["lemmas"]["ceiling"] = *opts.ceiling;
  const difflab::ExperimentConfig config = difflab::resolve_config(raw, experiment);
  if (opts.threads) difflab::set_thread_count(*opts.threads);

  const auto record = difflab::run_and_write(config, config.output_dir, opts.tag);
  std::cout << record.directory.string() << '\n' << record.manifest["summary"].dump(2) << '\n';
  if (!record.result.within_policy) {
    std::cerr << "policy check failed: an empirical constant exceeds the ceiling\n";
    return kPolicyExit;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"difflab experiment runner"};
  app.require_subcommand(1);

  RunOptions opts;
  const std::pair<const char*, difflab::Experiment> experiments[] = {
      {"schedule-compare", difflab::Experiment::schedule_compare},
      {"hard-instance", difflab::Experiment::hard_instance},
      {"verify-lemmas", difflab::Experiment::verify_lemmas},
      {"girsanov-budget", difflab::Experiment::girsanov_budget},
      {"sample", difflab::Experiment::sample},
  };
  std::optional<difflab::Experiment> chosen;
  for (const auto& [name, experiment] : experiments) {
    CLI::App* sub = app.add_subcommand(name, "run " + difflab::to_string(experiment));
    sub->add_option("--config", opts.config, "TOML or JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", opts.seed, "master seed");
    sub->add_option("--out", opts.out, "output root directory");
    sub->add_option("--ceiling", opts.ceiling, "policy ceiling for empirical constants");
    sub->add_option("--threads", opts.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--tag", opts.tag, "run directory name instead of a timestamp");
    sub->callback([&chosen, experiment = experiment] { chosen = experiment; });
  }

  std::string manifest;
  std::optional<std::size_t> replay_threads;
  CLI::App* replay = app.add_subcommand("replay", "re-run a manifest and compare rows.csv bytes");
  replay->add_option("--manifest", manifest, "manifest.json of a previous run")
      ->required()
      ->check(CLI::ExistingFile);
  replay->add_option("--threads", replay_threads, "worker threads")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (chosen) return run(*chosen, opts);
    if (replay_threads) difflab::set_thread_count(*replay_threads);
    const auto outcome = difflab::replay_manifest(manifest);
    std::cout << (outcome.identical ? "identical: " : "DIFFERS: ") << outcome.rows_path.string()
              << '\n';
    return outcome.identical ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
