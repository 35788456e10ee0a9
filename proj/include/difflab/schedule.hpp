#pragma once

#include <cstddef>
#include <json.hpp>
#include <string>
#include <vector>

namespace difflab {

enum class ScheduleKind { constant, linear, adaptive };

std::string to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(const std::string& name);

/// Decreasing discretization times T = t_0 > t_1 > ... > t_N, stored as the
/// forward time of the marginal q_t each reverse step is aiming at.
class Schedule {
 public:
  Schedule(ScheduleKind kind, double T, double gamma, std::size_t n_requested,
           std::vector<double> times);

  ScheduleKind kind() const noexcept { return kind_; }
  double horizon() const noexcept { return T_; }
  double gamma() const noexcept { return gamma_; }
  std::size_t n_requested() const noexcept { return n_requested_; }
  const std::vector<double>& times() const noexcept { return times_; }

  /// Realized number of steps N (times().size() - 1).
  std::size_t steps() const noexcept { return times_.size() - 1; }
  double step(std::size_t k) const { return times_[k] - times_[k + 1]; }
  std::vector<double> step_sizes() const;
  double terminal_time() const { return times_.back(); }
  /// t_N / gamma; the adaptive rule keeps this inside (0, 1].
  double terminal_ratio() const { return times_.back() / gamma_; }

 private:
  ScheduleKind kind_;
  double T_;
  double gamma_;
  std::size_t n_requested_;
  std::vector<double> times_;
};

/// h_k = (1 - e^{-2 t_k})(T + log 1/gamma) / N from t_0 = T until the first
/// t_k <= gamma.
Schedule adaptive_schedule(double T, double gamma, std::size_t N);

/// N equal steps from T to gamma.
Schedule constant_schedule(double T, double gamma, std::size_t N);

/// Steps proportional to the current time: t_k = T (gamma / T)^{k/N}.
Schedule linear_schedule(double T, double gamma, std::size_t N);

Schedule make_schedule(ScheduleKind kind, double T, double gamma, std::size_t N);

/// sum_k h_k / (1 - e^{-2 t_k}).
double kl_budget(const Schedule& schedule);

void to_json(nlohmann::json& j, const Schedule& s);
Schedule schedule_from_json(const nlohmann::json& j);

}  // namespace difflab
