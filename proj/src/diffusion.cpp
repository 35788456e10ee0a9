#include "difflab/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "difflab/errors.hpp"
#include "difflab/parallel.hpp"
#include "difflab/schedule.hpp"

namespace difflab {
namespace {

constexpr std::size_t kPathGrid = 64;
constexpr std::size_t kScoreGrid = 16;

void check_trials(std::size_t trials, double delta) {
  if (trials < 1) throw InputError("verifier needs at least one trial");
  if (!(delta > 0.0 && delta < 1.0)) throw InputError("delta must lie in (0, 1)");
}

double ratio(double quantile, double bound) {
  if (quantile == 0.0) return 0.0;
  return quantile / bound;
}

// Exact OU transition over a duration dt.
Vector ou_step(const Vector& x, double dt, Stream& rng) {
  return std::exp(-dt) * x + std::sqrt(-std::expm1(-2.0 * dt)) * rng.normal_vector(x.size());
}

template <class Statistic>
LemmaReport run_trials(const std::string& id, std::size_t trials, double delta, double bound,
                       std::uint64_t seed, Statistic stat) {
  std::vector<double> values(trials);
  const std::uint64_t tag = label_hash(id);
  parallel_for(trials, [&](std::size_t i) {
    Stream rng = substream(seed, {tag, i});
    values[i] = stat(rng);
  });
  LemmaReport r;
  r.lemma_id = id;
  r.trials = trials;
  r.delta = delta;
  r.empirical_quantile = upper_quantile(std::move(values), delta);
  r.bound_form = bound;
  r.empirical_constant = ratio(r.empirical_quantile, bound);
  r.seed = seed;
  return r;
}

Vector draw_one(const Mixture& q, Stream& rng) { return sample(q, rng, 1).front(); }

}  // namespace

double sigma_sq(double t) { return -std::expm1(-2.0 * t); }

double time_for_sigma_sq(double s2) {
  if (!(s2 >= 0.0 && s2 < 1.0)) throw InputError("noise variance must lie in [0, 1)");
  return -0.5 * std::log1p(-s2);
}

NoiseLevel NoiseLevel::at(double t) {
  if (!(t >= 0.0)) throw InputError("time must be non-negative");
  return {t, difflab::sigma_sq(t)};
}

void to_json(nlohmann::json& j, const LemmaReport& r) {
  j = nlohmann::json{{"lemma_id", r.lemma_id},
                     {"trials", r.trials},
                     {"delta", r.delta},
                     {"empirical_quantile", r.empirical_quantile},
                     {"bound_form", r.bound_form},
                     {"empirical_constant", r.empirical_constant},
                     {"seed", r.seed}};
}

double upper_quantile(std::vector<double> values, double delta) {
  if (values.empty()) throw InputError("quantile of an empty sample");
  if (!(delta >= 0.0 && delta <= 1.0)) throw InputError("delta must lie in [0, 1]");
  const double n = static_cast<double>(values.size());
  auto k = static_cast<std::size_t>(std::ceil((1.0 - delta) * n - 1e-9));
  k = std::clamp<std::size_t>(k, 1, values.size());
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k - 1),
                   values.end());
  return values[k - 1];
}

Points forward_marginal_sample(const Mixture& q0, double t, Stream& rng, std::size_t n) {
  if (!(t >= 0.0)) throw InputError("time must be non-negative");
  Points xs = sample(q0, rng, n);
  if (t == 0.0) return xs;
  for (auto& x : xs) x = ou_step(x, t, rng);
  return xs;
}

ForwardPath simulate_forward_path(const Mixture& q0, double t_lo, double t_hi,
                                  std::size_t grid_steps, Stream& rng) {
  if (!(t_lo >= 0.0 && t_lo < t_hi)) throw InputError("path needs 0 <= t_lo < t_hi");
  if (grid_steps < 1) throw InputError("path needs at least one grid step");
  ForwardPath path;
  path.seed = rng.seed();
  path.times.resize(grid_steps + 1);
  const double dt = (t_hi - t_lo) / static_cast<double>(grid_steps);
  for (std::size_t j = 0; j < grid_steps; ++j) path.times[j] = t_lo + static_cast<double>(j) * dt;
  path.times[grid_steps] = t_hi;
  path.states.reserve(grid_steps + 1);
  path.states.push_back(draw_one(smooth(q0, t_lo), rng));
  for (std::size_t j = 0; j < grid_steps; ++j) {
    path.states.push_back(ou_step(path.states.back(), path.times[j + 1] - path.times[j], rng));
  }
  return path;
}

LemmaReport verify_max_deviation(const Mixture& q0, double t_k, double h, std::size_t trials,
                                 double delta, std::uint64_t seed) {
  check_trials(trials, delta);
  if (!(h >= 0.0 && h < 1.0)) throw InputError("deviation window h must lie in [0, 1)");
  if (h >= t_k) throw InputError("deviation window h must be smaller than t_k");
  const double d = q0.dim();
  const double bound = h * (d + std::log(1.0 / delta));
  return run_trials("movbnd", trials, delta, bound, seed, [&](Stream& rng) {
    if (h == 0.0) return 0.0;
    const auto path = simulate_forward_path(q0, t_k - h, t_k, kPathGrid - 1, rng);
    const Vector& end = path.states.back();
    double worst = 0.0;
    for (std::size_t j = 0; j < path.times.size(); ++j) {
      const double gap = (std::exp(t_k - path.times[j]) * end - path.states[j]).squaredNorm();
      worst = std::max(worst, gap);
    }
    return worst;
  });
}

LemmaReport verify_score_norm_subgaussian(const Mixture& q0, double t, std::size_t trials,
                                          double delta, std::uint64_t seed) {
  check_trials(trials, delta);
  if (!(t > 0.0)) throw InputError("score-norm verifier needs t > 0");
  const Mixture qt = smooth(q0, t);
  const double bound = (q0.dim() + std::log(1.0 / delta)) / sigma_sq(t);
  return run_trials("score_bound_whp", trials, delta, bound, seed, [&](Stream& rng) {
    return score(qt, draw_one(qt, rng)).squaredNorm();
  });
}

double spectral_norm(const Matrix& m) {
  const auto d = m.rows();
  Vector v = Vector::Constant(d, 1e-3);
  v[0] += 1.0;
  v.normalize();
  double estimate = 0.0;
  for (int it = 0; it < 200; ++it) {
    Vector w = m * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    const bool converged = std::abs(norm - estimate) <= 1e-8 * norm;
    estimate = norm;
    if (converged) break;
    v = w / norm;
  }
  return estimate;
}

LemmaReport verify_local_lipschitz(const Mixture& q0, double t, double radius_scale,
                                   std::size_t trials, double delta, std::uint64_t seed) {
  check_trials(trials, delta);
  if (!(t > 0.0)) throw InputError("Lipschitz verifier needs t > 0");
  if (!(radius_scale >= 0.0)) throw InputError("radius_scale must be non-negative");
  if (q0.dim() > 16) throw InputError("Jacobian verifiers support d <= 16");
  const Mixture qt = smooth(q0, t);
  const double d = q0.dim();
  const double level = d + std::log(1.0 / delta);
  const double radius = radius_scale * std::sqrt(sigma_sq(t)) / std::sqrt(level);
  const double bound = level / sigma_sq(t);
  return run_trials("general_lipschitz_bound", trials, delta, bound, seed, [&](Stream& rng) {
    Vector x = draw_one(qt, rng);
    Vector dir = rng.normal_vector(q0.dim());
    const double r = radius * std::pow(rng.uniform(), 1.0 / d);
    const double n = dir.norm();
    if (n > 0.0) x += (r / n) * dir;
    return spectral_norm(score_jacobian(qt, x));
  });
}

LemmaReport verify_smoothing_drift(const Mixture& q0, double t_k, double eta, std::size_t trials,
                                   double delta, std::uint64_t seed) {
  check_trials(trials, delta);
  if (!(eta > 0.0 && eta < 1.0)) throw InputError("eta must lie in (0, 1)");
  if (!(t_k > 0.0)) throw InputError("smoothing-drift verifier needs t_k > 0");
  const double s2 = sigma_sq(t_k);
  const double t_less = time_for_sigma_sq((1.0 - eta) * (1.0 - eta) * s2);
  if (!(t_less > 0.0)) throw InputError("eta leaves no valid smaller time");
  const Mixture q_hi = smooth(q0, t_k);
  const Mixture q_lo = smooth(q0, t_less);
  const double level = q0.dim() + std::log(1.0 / (eta * delta));
  const double bound = eta * eta / s2 * level * level * level;
  return run_trials("different_smoothing_norm_bound", trials, delta, bound, seed,
                    [&](Stream& rng) {
                      const Vector x = draw_one(q_hi, rng);
                      return (score(q_hi, x) - score(q_lo, x)).squaredNorm();
                    });
}

LemmaReport verify_single_step_discretization(const Mixture& q0, double t_k, double epsilon,
                                              std::size_t trials, double delta,
                                              std::uint64_t seed) {
  check_trials(trials, delta);
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InputError("epsilon must lie in (0, 1)");
  if (!(t_k > 0.0)) throw InputError("discretization verifier needs t_k > 0");
  const double s2 = sigma_sq(t_k);
  const double level = q0.dim() + std::log(1.0 / delta);
  const double h = epsilon * s2 / (level * level * level);
  if (h < 1e-12) throw InputError("step h_k underflows below 1e-12");
  if (t_k - h < 0.0) throw InputError("step h_k exceeds t_k");
  const double bound = epsilon / s2;
  // Marginal laws on the score grid, shared by all trials.
  std::vector<Mixture> laws;
  std::vector<double> grid(kScoreGrid);
  for (std::size_t j = 0; j < kScoreGrid; ++j) {
    grid[j] = j + 1 == kScoreGrid ? t_k
                                  : (t_k - h) + h * static_cast<double>(j) / (kScoreGrid - 1);
    laws.push_back(smooth(q0, grid[j]));
  }
  return run_trials("single_score_discretization_bound", trials, delta, bound, seed,
                    [&](Stream& rng) {
                      Points states{draw_one(laws.front(), rng)};
                      for (std::size_t j = 1; j < kScoreGrid; ++j) {
                        states.push_back(ou_step(states.back(), grid[j] - grid[j - 1], rng));
                      }
                      const Vector top = score(laws.back(), states.back());
                      double worst = 0.0;
                      for (std::size_t j = 0; j < kScoreGrid; ++j) {
                        worst = std::max(worst, (top - score(laws[j], states[j])).squaredNorm());
                      }
                      return worst;
                    });
}

FunctionalEstimate pathwise_discretization_functional(const Mixture& q0, const Schedule& schedule,
                                                      std::size_t n_paths, std::size_t substeps,
                                                      std::uint64_t seed) {
  if (n_paths < 2) throw InputError("functional estimate needs at least two paths");
  if (substeps < 1) throw InputError("functional estimate needs at least one substep");
  // Forward time runs upward through the schedule: t_N < ... < t_0.
  std::vector<double> up(schedule.times().rbegin(), schedule.times().rend());
  // Per-step sub-grids and their marginal laws.
  std::vector<std::vector<double>> grids;
  std::vector<std::vector<Mixture>> laws;
  for (std::size_t k = 0; k + 1 < up.size(); ++k) {
    std::vector<double> g(substeps + 1);
    std::vector<Mixture> l;
    for (std::size_t j = 0; j <= substeps; ++j) {
      g[j] = j == substeps ? up[k + 1]
                           : up[k] + (up[k + 1] - up[k]) * static_cast<double>(j) / substeps;
      l.push_back(smooth(q0, g[j]));
    }
    grids.push_back(std::move(g));
    laws.push_back(std::move(l));
  }
  const Mixture start = smooth(q0, up.front());
  std::vector<double> totals(n_paths);
  const std::size_t blocks = block_count(n_paths);
  parallel_for(blocks, [&](std::size_t b) {
    Stream rng = substream(seed, {label_hash("pathwise"), b});
    const std::size_t end = std::min(n_paths, (b + 1) * kBlockSize);
    for (std::size_t p = b * kBlockSize; p < end; ++p) {
      Vector x = draw_one(start, rng);
      double total = 0.0;
      std::vector<Vector> states(substeps + 1);
      for (std::size_t k = 0; k < grids.size(); ++k) {
        const auto& g = grids[k];
        states[0] = x;
        for (std::size_t j = 1; j <= substeps; ++j) states[j] = ou_step(states[j - 1], g[j] - g[j - 1], rng);
        // The step's frozen score sits at the top of the interval.
        const Vector frozen = score(laws[k][substeps], states[substeps]);
        double prev = (frozen - score(laws[k][0], states[0])).squaredNorm();
        for (std::size_t j = 1; j <= substeps; ++j) {
          const double cur = j == substeps ? 0.0 : (frozen - score(laws[k][j], states[j])).squaredNorm();
          total += 0.5 * (prev + cur) * (g[j] - g[j - 1]);
          prev = cur;
        }
        x = states[substeps];
      }
      totals[p] = total;
    }
  });
  double mean = 0.0;
  for (double v : totals) mean += v;
  mean /= static_cast<double>(n_paths);
  double var = 0.0;
  for (double v : totals) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n_paths - 1);
  return {mean, std::sqrt(var / static_cast<double>(n_paths))};
}

}  // namespace difflab
