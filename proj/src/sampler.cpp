#include "difflab/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "difflab/diffusion.hpp"
#include "difflab/errors.hpp"
#include "difflab/parallel.hpp"
#include "difflab/table.hpp"

namespace difflab {

AnalyticScore::AnalyticScore(Mixture q0) : q0_(std::move(q0)) {}

Vector AnalyticScore::evaluate(double t, const Vector& x) const { return score(smooth(q0_, t), x); }

std::string AnalyticScore::descriptor() const {
  return "analytic(components=" + std::to_string(q0_.size()) + ",dim=" + std::to_string(q0_.dim()) +
         ")";
}

MixtureScore::MixtureScore(Mixture law, std::string label)
    : law_(std::move(law)), label_(std::move(label)) {}

Vector MixtureScore::evaluate(double /*t*/, const Vector& x) const { return score(law_, x); }

CorruptedScore::CorruptedScore(ScoreModelPtr base, Perturbation perturbation, std::string label)
    : base_(std::move(base)), perturbation_(std::move(perturbation)), label_(std::move(label)) {
  if (!base_) throw InputError("corrupted score needs a base model");
}

std::shared_ptr<CorruptedScore> CorruptedScore::constant_bias(ScoreModelPtr base,
                                                             const Vector& bias) {
  if (bias.size() != base->dim()) throw InputError("bias has wrong dimension");
  std::ostringstream label;
  label << "bias(" << bias.norm() << ")";
  return std::make_shared<CorruptedScore>(
      std::move(base), [bias](double, const Vector&) { return bias; }, label.str());
}

std::shared_ptr<CorruptedScore> CorruptedScore::low_time_error(ScoreModelPtr base, double cutoff,
                                                              double magnitude) {
  const int d = base->dim();
  const Vector direction = Vector::Ones(d) / std::sqrt(static_cast<double>(d));
  std::ostringstream label;
  label << "low_time_error(cutoff=" << cutoff << ",magnitude=" << magnitude << ")";
  return std::make_shared<CorruptedScore>(
      std::move(base),
      [=](double t, const Vector&) -> Vector {
        if (t >= cutoff) return Vector::Zero(d);
        return magnitude / std::sqrt(sigma_sq(t)) * direction;
      },
      label.str());
}

Vector CorruptedScore::evaluate(double t, const Vector& x) const {
  return base_->evaluate(t, x) + perturbation_(t, x);
}

std::string CorruptedScore::descriptor() const { return base_->descriptor() + "+" + label_; }

StepResult ddpm_step(const Vector& x, const Vector& s_hat, double h) {
  if (!(h > 0.0)) throw InputError("reverse step size must be positive");
  if (x.size() != s_hat.size()) throw InputError("state and score dimensions differ");
  const double grow = std::exp(h);
  return {grow * x + 2.0 * std::expm1(h) * s_hat, std::sqrt(std::expm1(2.0 * h))};
}

std::string to_string(Init init) {
  return init == Init::standard_normal ? "standard_normal" : "exact_qT";
}

Init init_from_string(const std::string& name) {
  if (name == "standard_normal") return Init::standard_normal;
  if (name == "exact_qT") return Init::exact_qT;
  throw InputError("unknown sampler init '" + name + "'");
}

SamplerOutput run_sampler(const Schedule& schedule, const ScoreModel& model,
                          const SamplerOptions& options) {
  if (options.n < 1) throw InputError("sampler needs n >= 1");
  if (options.init == Init::exact_qT && !options.q0) {
    throw InputError("exact_qT initialization needs the base mixture");
  }
  if (options.q0 && options.q0->dim() != model.dim()) {
    throw InputError("base mixture and score model dimensions differ");
  }
  const int d = model.dim();
  const std::size_t n = options.n;
  const std::size_t blocks = block_count(n);
  const auto& times = schedule.times();

  std::vector<Stream> streams;
  streams.reserve(blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    streams.push_back(substream(options.seed, {label_hash("sampler"), b}));
  }

  Points xs(n);
  const std::optional<Mixture> start =
      options.init == Init::exact_qT ? std::optional(smooth(*options.q0, times.front()))
                                     : std::nullopt;
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t end = std::min(n, (b + 1) * kBlockSize);
    for (std::size_t i = b * kBlockSize; i < end; ++i) {
      xs[i] = start ? sample(*start, streams[b], 1).front() : streams[b].normal_vector(d);
    }
  });

  SamplerOutput out{{}, {}, schedule, options.seed, model.descriptor()};
  std::vector<double> score_norms(options.record_trace ? n : 0);
  for (std::size_t k = 0; k + 1 < times.size(); ++k) {
    const double t = times[k];
    const double h = times[k] - times[k + 1];
    parallel_for(blocks, [&](std::size_t b) {
      const std::size_t end = std::min(n, (b + 1) * kBlockSize);
      for (std::size_t i = b * kBlockSize; i < end; ++i) {
        const Vector s = model.evaluate(t, xs[i]);
        if (!s.allFinite() || !xs[i].allFinite()) {
          std::ostringstream msg;
          msg << "non-finite score at step " << k << " (t = " << t
              << "), point norm = " << xs[i].norm();
          throw SamplerError(msg.str());
        }
        if (options.record_trace) score_norms[i] = s.norm();
        const StepResult step = ddpm_step(xs[i], s, h);
        xs[i] = step.mean + step.noise_std * streams[b].normal_vector(d);
      }
    });
    if (options.record_trace) {
      TraceRow row;
      row.t = t;
      double acc = 0.0;
      for (const auto& x : xs) acc += x.norm();
      row.mean_norm = acc / static_cast<double>(n);
      row.score_norm_q50 = upper_quantile(score_norms, 0.5);
      row.score_norm_q90 = upper_quantile(score_norms, 0.1);
      row.score_norm_q99 = upper_quantile(score_norms, 0.01);
      out.trace.push_back(row);
    }
  }
  out.samples = std::move(xs);
  return out;
}

Points terminal_unsmoothing_scale(const SamplerOutput& output) {
  const double scale = std::exp(output.terminal_time());
  Points out = output.samples;
  for (auto& x : out) x *= scale;
  return out;
}

Table samples_table(const Points& samples) {
  if (samples.empty()) throw InputError("no samples to tabulate");
  const auto d = samples.front().size();
  std::vector<std::string> cols;
  for (Eigen::Index j = 0; j < d; ++j) cols.push_back("x_" + std::to_string(j));
  Table table(cols);
  for (const auto& x : samples) {
    std::vector<Table::Cell> row;
    for (Eigen::Index j = 0; j < d; ++j) row.emplace_back(x[j]);
    table.add_row(std::move(row));
  }
  return table;
}

nlohmann::json sampler_sidecar(const SamplerOutput& output) {
  return {{"schedule", output.schedule},
          {"model", output.model_descriptor},
          {"seed", output.seed},
          {"n", output.samples.size()},
          {"terminal_time", output.terminal_time()}};
}

void write_sampler_output(const SamplerOutput& output, const std::filesystem::path& csv_path) {
  if (output.samples.empty()) throw InputError("sampler output has no samples");
  samples_table(output.samples).write_csv(csv_path);
  auto json_path = csv_path;
  json_path.replace_extension(".json");
  std::ofstream f(json_path);
  if (!f) throw std::runtime_error("cannot open " + json_path.string() + " for writing");
  f << sampler_sidecar(output).dump(2) << '\n';
}

}  // namespace difflab
