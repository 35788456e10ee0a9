#include "difflab/schedule.hpp"

#include <cmath>
#include <string>

#include "difflab/errors.hpp"

namespace difflab {

std::string to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::constant:
      return "constant";
    case ScheduleKind::linear:
      return "linear";
    case ScheduleKind::adaptive:
      return "adaptive";
  }
  return "unknown";
}

ScheduleKind schedule_kind_from_string(const std::string& name) {
  if (name == "constant") return ScheduleKind::constant;
  if (name == "linear") return ScheduleKind::linear;
  if (name == "adaptive") return ScheduleKind::adaptive;
  throw InputError("unknown schedule kind '" + name + "'");
}

Schedule::Schedule(ScheduleKind kind, double T, double gamma, std::size_t n_requested,
                   std::vector<double> times)
    : kind_(kind), T_(T), gamma_(gamma), n_requested_(n_requested), times_(std::move(times)) {
  if (times_.size() < 2) throw ScheduleError("schedule needs at least one step");
  if (times_.front() != T_) throw ScheduleError("schedule must start at T");
  for (std::size_t k = 0; k + 1 < times_.size(); ++k) {
    if (!(times_[k + 1] < times_[k])) throw ScheduleError("schedule times must strictly decrease");
  }
  if (times_.back() < 0.0) throw ScheduleError("schedule times must stay non-negative");
}

std::vector<double> Schedule::step_sizes() const {
  std::vector<double> h(steps());
  for (std::size_t k = 0; k < h.size(); ++k) h[k] = step(k);
  return h;
}

Schedule adaptive_schedule(double T, double gamma, std::size_t N) {
  if (!(T >= 1.0)) throw InputError("adaptive schedule needs T >= 1");
  if (!(gamma > 0.0 && gamma < 1.0)) throw InputError("adaptive schedule needs gamma in (0, 1)");
  const double span = T + std::log(1.0 / gamma);
  if (static_cast<double>(N) < std::ceil(span)) {
    throw ScheduleError("N = " + std::to_string(N) + " is below ceil(T + log 1/gamma) = " +
                        std::to_string(static_cast<long>(std::ceil(span))));
  }
  const double ratio = span / static_cast<double>(N);
  std::vector<double> times{T};
  // Step counts are O(N); the cap only guards against a stalled iteration.
  const std::size_t cap = 64 * N + 1024;
  while (times.back() > gamma) {
    const double t = times.back();
    const double next = t - (-std::expm1(-2.0 * t)) * ratio;
    if (!(next > 0.0)) {
      throw ScheduleError("adaptive step from t = " + std::to_string(t) +
                          " overshoots past 0; increase N");
    }
    times.push_back(next);
    if (times.size() > cap) throw ScheduleError("adaptive schedule failed to reach gamma");
  }
  return {ScheduleKind::adaptive, T, gamma, N, std::move(times)};
}

Schedule constant_schedule(double T, double gamma, std::size_t N) {
  if (N < 1) throw InputError("constant schedule needs N >= 1");
  if (!(gamma >= 0.0 && gamma < T)) throw InputError("constant schedule needs 0 <= gamma < T");
  std::vector<double> times(N + 1);
  const double h = (T - gamma) / static_cast<double>(N);
  for (std::size_t k = 0; k < N; ++k) times[k] = T - static_cast<double>(k) * h;
  times[N] = gamma;
  return {ScheduleKind::constant, T, gamma, N, std::move(times)};
}

Schedule linear_schedule(double T, double gamma, std::size_t N) {
  if (N < 1) throw InputError("linear schedule needs N >= 1");
  if (!(gamma > 0.0 && gamma < T)) throw InputError("linear schedule needs 0 < gamma < T");
  std::vector<double> times(N + 1);
  const double log_ratio = std::log(gamma / T);
  times[0] = T;
  for (std::size_t k = 1; k < N; ++k) {
    times[k] = T * std::exp(log_ratio * static_cast<double>(k) / static_cast<double>(N));
  }
  times[N] = gamma;
  return {ScheduleKind::linear, T, gamma, N, std::move(times)};
}

Schedule make_schedule(ScheduleKind kind, double T, double gamma, std::size_t N) {
  switch (kind) {
    case ScheduleKind::constant:
      return constant_schedule(T, gamma, N);
    case ScheduleKind::linear:
      return linear_schedule(T, gamma, N);
    case ScheduleKind::adaptive:
      return adaptive_schedule(T, gamma, N);
  }
  throw InputError("unknown schedule kind");
}

double kl_budget(const Schedule& schedule) {
  double total = 0.0;
  const auto& ts = schedule.times();
  for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
    total += (ts[k] - ts[k + 1]) / (-std::expm1(-2.0 * ts[k]));
  }
  return total;
}

void to_json(nlohmann::json& j, const Schedule& s) {
  j = nlohmann::json{{"kind", to_string(s.kind())},
                     {"T", s.horizon()},
                     {"gamma", s.gamma()},
                     {"N_requested", s.n_requested()},
                     {"times", s.times()}};
}

Schedule schedule_from_json(const nlohmann::json& j) {
  try {
    return {schedule_kind_from_string(j.at("kind").get<std::string>()), j.at("T").get<double>(),
            j.at("gamma").get<double>(), j.at("N_requested").get<std::size_t>(),
            j.at("times").get<std::vector<double>>()};
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed schedule JSON: ") + e.what());
  }
}

}  // namespace difflab
