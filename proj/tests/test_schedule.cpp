#include <doctest.h>

#include <cmath>
#include <random>

#include "difflab/errors.hpp"
#include "difflab/schedule.hpp"

using namespace difflab;

TEST_CASE("adaptive steps are a constant fraction of the noise variance") {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int rep = 0; rep < 30; ++rep) {
    const double T = 1.0 + 4.0 * unif(gen);
    const double gamma = std::pow(10.0, -4.0 + 3.5 * unif(gen));
    const double span = T + std::log(1.0 / gamma);
    const auto N = static_cast<std::size_t>(std::ceil(2.0 * span)) + static_cast<std::size_t>(400 * unif(gen));
    const Schedule s = adaptive_schedule(T, gamma, N);
    const double ratio = span / static_cast<double>(N);
    for (std::size_t k = 0; k < s.steps(); ++k) {
      CHECK(std::abs(s.step(k) / -std::expm1(-2.0 * s.times()[k]) - ratio) <= 1e-12 * ratio);
    }
    CHECK(s.terminal_time() <= gamma);
    CHECK(s.terminal_time() >= gamma / 8.0);
    CHECK(s.times()[s.steps() - 1] > gamma);
    CHECK(s.kind() == ScheduleKind::adaptive);
    CHECK(s.n_requested() == N);
    CHECK(kl_budget(s) == doctest::Approx(ratio * static_cast<double>(s.steps())).epsilon(1e-12));
  }
}

TEST_CASE("adaptive schedule rejects impossible inputs") {
  CHECK_THROWS_AS(adaptive_schedule(0.5, 0.01, 100), InputError);
  CHECK_THROWS_AS(adaptive_schedule(2.0, 0.0, 100), InputError);
  CHECK_THROWS_AS(adaptive_schedule(2.0, 1.0, 100), InputError);
  // ceil(T + log 1/gamma) = ceil(2 + 4.6) = 7.
  CHECK_THROWS_AS(adaptive_schedule(2.0, 0.01, 6), ScheduleError);
}

TEST_CASE("constant and linear schedules end exactly at gamma") {
  const Schedule c = constant_schedule(2.0, 0.05, 10);
  CHECK(c.steps() == 10);
  CHECK(c.terminal_time() == 0.05);
  for (std::size_t k = 0; k < 10; ++k) CHECK(c.step(k) == doctest::Approx(0.195).epsilon(1e-12));

  const Schedule l = linear_schedule(2.0, 0.02, 8);
  CHECK(l.terminal_time() == 0.02);
  const double q = std::pow(0.01, 1.0 / 8.0);
  for (std::size_t k = 0; k < 8; ++k) {
    CHECK(l.times()[k + 1] / l.times()[k] == doctest::Approx(q).epsilon(1e-12));
  }
  CHECK_THROWS_AS(constant_schedule(1.0, 1.0, 5), InputError);
  CHECK_THROWS_AS(linear_schedule(1.0, 0.0, 5), InputError);
  CHECK_THROWS_AS(linear_schedule(1.0, 0.1, 0), InputError);
  CHECK(make_schedule(ScheduleKind::linear, 2.0, 0.02, 8).times() == l.times());
}

TEST_CASE("schedule invariants are checked at construction") {
  CHECK_THROWS(Schedule(ScheduleKind::constant, 1.0, 0.1, 2, {1.0, 1.0, 0.1}));
  CHECK_THROWS(Schedule(ScheduleKind::constant, 1.0, 0.1, 2, {0.9, 0.5, 0.1}));
  CHECK_THROWS(Schedule(ScheduleKind::constant, 1.0, 0.1, 2, {1.0, 0.5, -0.1}));
}

TEST_CASE("kl budget of a constant schedule") {
  const Schedule c = constant_schedule(1.0, 0.1, 3);
  double expected = 0.0;
  for (std::size_t k = 0; k < 3; ++k) expected += c.step(k) / (1.0 - std::exp(-2.0 * c.times()[k]));
  CHECK(kl_budget(c) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("schedule kinds and JSON round trip") {
  for (auto kind : {ScheduleKind::constant, ScheduleKind::linear, ScheduleKind::adaptive}) {
    CHECK(schedule_kind_from_string(to_string(kind)) == kind);
  }
  CHECK_THROWS_AS(schedule_kind_from_string("cosine"), InputError);
  const Schedule s = adaptive_schedule(3.0, 0.01, 50);
  const nlohmann::json j = s;
  const Schedule back = schedule_from_json(j);
  CHECK(back.times() == s.times());
  CHECK(back.kind() == s.kind());
  CHECK(back.gamma() == s.gamma());
  CHECK(back.n_requested() == 50);
}
