#include "difflab/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "difflab/diffusion.hpp"
#include "difflab/errors.hpp"
#include "difflab/parallel.hpp"
#include "difflab/table.hpp"

namespace difflab {

NoiseChannel NoiseChannel::at_time(double t) {
  if (!(t > 0.0)) throw InputError("paired samples need t > 0");
  return {std::exp(-t), difflab::sigma_sq(t), t};
}

NoiseChannel NoiseChannel::direct(double s2) {
  if (!(s2 > 0.0)) throw InputError("smoothing variance must be positive");
  return {1.0, s2, std::nullopt};
}

bool NoiseChannel::same_as(const NoiseChannel& other) const {
  return scale == other.scale && sigma_sq == other.sigma_sq && t == other.t;
}

Batch paired_batch(const Mixture& q0, double t, std::size_t m, Stream& rng) {
  const NoiseChannel ch = NoiseChannel::at_time(t);
  const Points ys = sample(q0, rng, m);
  Batch batch;
  batch.reserve(m);
  const double sd = std::sqrt(ch.sigma_sq);
  for (const auto& y : ys) {
    Vector z = sd * rng.normal_vector(q0.dim());
    Vector x = ch.scale * y + z;
    batch.push_back({y, std::move(z), std::move(x), ch});
  }
  return batch;
}

Batch paired_batch_smoothed(const Mixture& p, double s2, std::size_t m, Stream& rng) {
  const NoiseChannel ch = NoiseChannel::direct(s2);
  std::vector<Component> base = p.components();
  for (auto& c : base) {
    if (c.variance < s2) throw InputError("component variance is below the smoothing variance");
    // A point mass is represented by a zero residual variance below.
    c.variance -= s2;
  }
  std::vector<double> cumulative;
  double acc = 0.0;
  for (const auto& c : base) cumulative.push_back(acc += c.weight());
  Batch batch;
  batch.reserve(m);
  const double sd = std::sqrt(s2);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& c = base[rng.categorical(cumulative)];
    Vector y = c.variance > 0.0 ? Vector(c.mean + std::sqrt(c.variance) * rng.normal_vector(p.dim()))
                                : c.mean;
    Vector z = sd * rng.normal_vector(p.dim());
    Vector x = y + z;
    batch.push_back({std::move(y), std::move(z), std::move(x), ch});
  }
  return batch;
}

double score_matching_loss(const ScoreModel& model, const Batch& batch) {
  if (batch.empty()) throw InputError("score-matching loss needs a non-empty batch");
  const NoiseChannel& ch = batch.front().channel;
  double total = 0.0;
  for (const auto& s : batch) {
    if (!s.channel.same_as(ch)) throw InputError("batch mixes noise levels");
    total += (model.evaluate(ch.model_time(), s.x) + s.z / ch.sigma_sq).squaredNorm();
  }
  return total / static_cast<double>(batch.size());
}

double l_prime(const ScoreModel& model, const ScoreModel& true_score, const PairedSample& sample) {
  const double t = sample.channel.model_time();
  const Vector truth = true_score.evaluate(t, sample.x);
  const Vector diff = model.evaluate(t, sample.x) - truth;
  const Vector residual = truth + sample.z / sample.channel.sigma_sq;
  return diff.squaredNorm() + 2.0 * diff.dot(residual);
}

HypothesisClass::HypothesisClass(std::vector<Hypothesis> members) : members_(std::move(members)) {
  if (members_.empty()) throw InputError("hypothesis class must be non-empty");
  std::set<std::string> seen;
  for (const auto& h : members_) {
    if (!h.model) throw InputError("hypothesis '" + h.label + "' has no model");
    if (!seen.insert(h.label).second) throw InputError("duplicate hypothesis label '" + h.label + "'");
  }
}

const Hypothesis& HypothesisClass::find(const std::string& label) const {
  for (const auto& h : members_) {
    if (h.label == label) return h;
  }
  throw InputError("no hypothesis labelled '" + label + "'");
}

ErmResult erm(const HypothesisClass& cls, const Batch& batch) {
  if (batch.empty()) throw InputError("ERM needs a non-empty batch");
  const auto& members = cls.members();
  std::vector<double> losses(members.size());
  parallel_for(members.size(),
               [&](std::size_t i) { losses[i] = score_matching_loss(*members[i].model, batch); });
  ErmResult result;
  std::size_t best = 0;
  for (std::size_t i = 0; i < members.size(); ++i) {
    result.losses.emplace_back(members[i].label, losses[i]);
    if (losses[i] < losses[best] ||
        (losses[i] == losses[best] && members[i].label < members[best].label)) {
      best = i;
    }
  }
  result.label = members[best].label;
  return result;
}

ErrorReport error_report(const ScoreModel& f, const ScoreModel& g, const Mixture& p, double delta,
                         std::size_t n_eval, Stream& rng, double t) {
  if (!(delta > 0.0 && delta <= 1.0)) throw InputError("delta must lie in (0, 1]");
  if (static_cast<double>(n_eval) < std::ceil(10.0 / delta - 1e-9)) {
    throw InputError("n_eval = " + std::to_string(n_eval) + " is too small for delta; need " +
                     std::to_string(static_cast<long>(std::ceil(10.0 / delta - 1e-9))));
  }
  const Points xs = sample(p, rng, n_eval);
  std::vector<double> norms(n_eval);
  double l2 = 0.0;
  for (std::size_t i = 0; i < n_eval; ++i) {
    const double sq = (f.evaluate(t, xs[i]) - g.evaluate(t, xs[i])).squaredNorm();
    l2 += sq;
    norms[i] = std::sqrt(sq);
  }
  return {l2 / static_cast<double>(n_eval), upper_quantile(std::move(norms), delta), delta, n_eval};
}

double girsanov_kl_functional(const Schedule& schedule, const ScoreModel& model, const Mixture& q0,
                              std::size_t n_paths, std::uint64_t seed) {
  if (n_paths < 1) throw InputError("functional needs n_paths >= 1");
  if (model.dim() != q0.dim()) throw InputError("model and mixture dimensions differ");
  const auto& ts = schedule.times();
  std::vector<double> terms(schedule.steps());
  parallel_for(terms.size(), [&](std::size_t k) {
    Stream rng = substream(seed, {label_hash("girsanov"), k});
    const Mixture qt = smooth(q0, ts[k]);
    const Points xs = sample(qt, rng, n_paths);
    double acc = 0.0;
    for (const auto& x : xs) acc += (score(qt, x) - model.evaluate(ts[k], x)).squaredNorm();
    terms[k] = acc / static_cast<double>(n_paths) * (ts[k] - ts[k + 1]);
  });
  double total = 0.0;
  for (double v : terms) total += v;
  return total;
}

InfoTheoreticPair build_info_theoretic_pair(double eta, double R, double sigma) {
  if (!(eta > 0.0 && eta < 1.0)) throw InputError("eta must lie in (0, 1)");
  if (!(R > 0.0)) throw InputError("R must be positive");
  if (!(sigma > 0.0)) throw InputError("sigma must be positive");
  const double v = sigma * sigma;
  const Vector origin = Vector::Zero(1);
  Mixture p1 = Mixture::from_weights({1.0 - eta, eta}, {origin, Vector::Constant(1, -R)}, {v, v});
  Mixture p2 = Mixture::from_weights({1.0 - eta, eta}, {origin, Vector::Constant(1, R)}, {v, v});
  auto s1 = std::make_shared<MixtureScore>(p1, "s1");
  auto s2 = std::make_shared<MixtureScore>(p2, "s2");
  return {std::move(p1), std::move(p2), std::move(s1), std::move(s2)};
}

LowerBoundInstance build_score_matching_lower_bound_instance(double S, std::size_t m,
                                                             double sigma) {
  if (m < 2) throw InputError("lower-bound instance needs m >= 2");
  if (!(S > 0.0)) throw InputError("S must be positive");
  if (!(sigma > 0.0)) throw InputError("sigma must be positive");
  const double root = 10.0 * std::sqrt(std::log(static_cast<double>(m)));
  const double log_eta = std::log(S) - 0.5 * S * S + root * S - std::log(root);
  if (!(log_eta < 0.0)) {
    std::ostringstream msg;
    msg << "eta = exp(" << log_eta << ") >= 1 for S = " << S << ", m = " << m
        << "; S must be larger";
    throw InputError(msg.str());
  }
  const double v = sigma * sigma;
  // log(1 - eta) without forming eta.
  const double log_rest = std::log1p(-std::exp(log_eta));
  Mixture p_hat(1, {{log_eta, Vector::Zero(1), v}, {log_rest, Vector::Constant(1, S), v}});
  Mixture p_star(1, {{0.0, Vector::Zero(1), v}});
  auto s_star = std::make_shared<MixtureScore>(p_star, "s_star");
  auto s_hat = std::make_shared<MixtureScore>(p_hat, "s_hat");
  return {std::move(p_star), std::move(s_star), std::move(p_hat), std::move(s_hat), log_eta};
}

void to_json(nlohmann::json& j, const ErrorReport& r) {
  j = nlohmann::json{
      {"l2_sq", r.l2_sq}, {"quantile_eps", r.quantile_eps}, {"delta", r.delta}, {"n_eval", r.n_eval}};
}

void to_json(nlohmann::json& j, const ErmResult& r) {
  j = nlohmann::json{{"label", r.label}, {"losses", nlohmann::json::object()}};
  for (const auto& [label, loss] : r.losses) j["losses"][label] = loss;
}

void write_batch_csv(const Batch& batch, const std::filesystem::path& path) {
  if (batch.empty()) throw InputError("cannot write an empty batch");
  const auto d = batch.front().x.size();
  std::vector<std::string> cols;
  for (const char* prefix : {"y_", "z_", "x_"}) {
    for (Eigen::Index j = 0; j < d; ++j) cols.push_back(prefix + std::to_string(j));
  }
  cols.emplace_back("t");
  Table table(cols);
  for (const auto& s : batch) {
    std::vector<Table::Cell> row;
    for (const Vector* v : {&s.y, &s.z, &s.x}) {
      for (Eigen::Index j = 0; j < d; ++j) row.emplace_back((*v)[j]);
    }
    if (s.channel.t) {
      row.emplace_back(*s.channel.t);
    } else {
      row.emplace_back(std::string("direct"));
    }
    table.add_row(std::move(row));
  }
  table.write_csv(path);
}

}  // namespace difflab
