#include "difflab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "difflab/errors.hpp"

namespace difflab {
namespace {

constexpr double kQuadratureTolerance = 1e-8;

using Integrand = std::function<double(double)>;

double simpson(double a, double fa, double fm, double b, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_simpson(const Integrand& f, double a, double fa, double m, double fm, double b,
                        double fb, double whole, double tol, int depth) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson(a, fa, flm, m, fm);
  const double right = simpson(m, fm, frm, b, fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson(f, a, fa, lm, flm, m, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, fm, rm, frm, b, fb, right, 0.5 * tol, depth - 1);
}

double integrate(const Integrand& f, double a, double b, double tol) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  return adaptive_simpson(f, a, fa, m, fm, b, fb, simpson(a, fa, fm, b, fb), tol, 48);
}

// Breakpoints at every component's centre +/- k sd for k in [-width, width].
std::vector<double> breakpoints(std::initializer_list<const Mixture*> mixtures, double width) {
  std::vector<double> pts;
  for (const Mixture* g : mixtures) {
    for (const auto& c : g->components()) {
      const double sd = std::sqrt(c.variance);
      for (double k = -width; k <= width; k += 1.0) pts.push_back(c.mean[0] + k * sd);
    }
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

void require_1d(const Mixture& g, const char* what) {
  if (g.dim() != 1) throw InputError(std::string(what) + " needs 1-d mixtures");
}

}  // namespace

std::string to_string(DistanceKind kind) {
  switch (kind) {
    case DistanceKind::tv_quadrature:
      return "tv_quadrature";
    case DistanceKind::tv_binned:
      return "tv_binned";
    case DistanceKind::w2_empirical_1d:
      return "w2_empirical_1d";
    case DistanceKind::w2_gaussian_exact:
      return "w2_gaussian_exact";
  }
  return "unknown";
}

void to_json(nlohmann::json& j, const DistanceEstimate& e) {
  j = nlohmann::json{{"kind", to_string(e.kind)}, {"value", e.value}};
  j["standard_error"] = e.standard_error ? nlohmann::json(*e.standard_error) : nlohmann::json();
}

DistanceEstimate tv_quadrature_1d(const Mixture& p, const Mixture& q) {
  require_1d(p, "tv_quadrature_1d");
  require_1d(q, "tv_quadrature_1d");
  const auto pts = breakpoints({&p, &q}, 12.0);
  const Integrand f = [&](double x) { return 0.5 * std::abs(density_1d(p, x) - density_1d(q, x)); };
  const double tol = kQuadratureTolerance / static_cast<double>(pts.size());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) total += integrate(f, pts[i], pts[i + 1], tol);
  return {DistanceKind::tv_quadrature, std::clamp(total, 0.0, 1.0), std::nullopt};
}

DistanceEstimate w2_empirical_1d(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InputError("w2_empirical_1d needs equal sample counts");
  if (a.empty()) throw InputError("w2_empirical_1d needs samples");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) acc += (sa[i] - sb[i]) * (sa[i] - sb[i]);
  return {DistanceKind::w2_empirical_1d, std::sqrt(acc / static_cast<double>(sa.size())),
          std::nullopt};
}

std::vector<double> coordinates(const Points& points) {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& x : points) {
    if (x.size() != 1) throw InputError("expected 1-d samples");
    out.push_back(x[0]);
  }
  return out;
}

DistanceEstimate w2_empirical_1d(const Points& a, const Points& b) {
  return w2_empirical_1d(coordinates(a), coordinates(b));
}

double w2_gaussian_exact(double var_a, double var_b, double mean_a, double mean_b) {
  if (!(var_a > 0.0 && var_b > 0.0)) throw InputError("variances must be positive");
  const double dm = mean_a - mean_b;
  const double ds = std::sqrt(var_a) - std::sqrt(var_b);
  return std::sqrt(dm * dm + ds * ds);
}

DistanceEstimate tv_binned(std::span<const double> samples, const Mixture& p, std::size_t bins) {
  require_1d(p, "tv_binned");
  if (bins < 16) throw InputError("tv_binned needs at least 16 bins");
  if (samples.empty()) throw InputError("tv_binned needs samples");
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& c : p.components()) {
    const double sd = std::sqrt(c.variance);
    lo = std::min(lo, c.mean[0] - 10.0 * sd);
    hi = std::max(hi, c.mean[0] + 10.0 * sd);
  }
  const double f_lo = cdf_1d(p, lo);
  const double f_hi = cdf_1d(p, hi);
  // Interior edges at equal analytic mass, located by bisection on the CDF.
  std::vector<double> edges(bins + 1);
  edges.front() = lo;
  edges.back() = hi;
  for (std::size_t j = 1; j < bins; ++j) {
    const double target = f_lo + (f_hi - f_lo) * static_cast<double>(j) / static_cast<double>(bins);
    double a = edges[j - 1], b = hi;
    for (int it = 0; it < 200 && b - a > 1e-14 * (1.0 + std::abs(a)); ++it) {
      const double m = 0.5 * (a + b);
      (cdf_1d(p, m) < target ? a : b) = m;
    }
    edges[j] = 0.5 * (a + b);
  }
  std::vector<double> analytic(bins);
  for (std::size_t j = 0; j < bins; ++j) {
    const double left = j == 0 ? 0.0 : cdf_1d(p, edges[j]);
    const double right = j + 1 == bins ? 1.0 : cdf_1d(p, edges[j + 1]);
    analytic[j] = right - left;
  }
  std::vector<double> counts(bins, 0.0);
  for (double x : samples) {
    auto it = std::upper_bound(edges.begin() + 1, edges.end() - 1, x);
    counts[static_cast<std::size_t>(it - (edges.begin() + 1))] += 1.0;
  }
  const double n = static_cast<double>(samples.size());
  double tv = 0.0;
  for (std::size_t j = 0; j < bins; ++j) tv += std::abs(counts[j] / n - analytic[j]);
  return {DistanceKind::tv_binned, 0.5 * tv, std::nullopt};
}

DistanceEstimate tv_binned(const Points& samples, const Mixture& p, std::size_t bins) {
  return tv_binned(coordinates(samples), p, bins);
}

EndpointBounds endpoint_bounds(const Mixture& q0, double gamma, double T) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InputError("gamma must lie in [0, 1)");
  if (!(T >= 1.0)) throw InputError("endpoint bounds need T >= 1");
  const double m2 = q0.second_moment();
  return {gamma * m2 + std::sqrt(2.0 * gamma), std::exp(-T) * m2};
}

}  // namespace difflab
