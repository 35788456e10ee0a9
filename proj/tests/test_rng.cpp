#include <doctest.h>

#include <atomic>
#include <set>
#include <stdexcept>
#include <vector>

#include "difflab/parallel.hpp"
#include "difflab/rng.hpp"

using namespace difflab;

TEST_CASE("derived seeds depend on every label and on their order") {
  const auto a = derive_seed(7, {1, 2});
  CHECK(a == derive_seed(7, {1, 2}));
  CHECK(a != derive_seed(7, {2, 1}));
  CHECK(a != derive_seed(8, {1, 2}));
  CHECK(a != derive_seed(7, {1, 2, 0}));
  CHECK(label_hash("sampler") != label_hash("reference"));
}

TEST_CASE("streams with equal seeds replay identically") {
  Stream a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
  Stream c(43);
  CHECK(a.normal() != c.normal());
}

TEST_CASE("categorical draws follow the cumulative table") {
  Stream rng(3);
  const std::vector<double> cumulative{0.2, 0.5, 1.0};
  std::vector<int> counts(3, 0);
  const int n = 200000;
  for (int i = 0; i < n; ++i) ++counts[rng.categorical(cumulative)];
  CHECK(counts[0] / double(n) == doctest::Approx(0.2).epsilon(0.02));
  CHECK(counts[1] / double(n) == doctest::Approx(0.3).epsilon(0.02));
  CHECK(counts[2] / double(n) == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("parallel_for visits every index once and rethrows failures") {
  const auto saved = thread_count();
  set_thread_count(4);
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i].fetch_add(1); });
  for (const auto& h : hits) CHECK(h.load() == 1);

  CHECK_THROWS_AS(parallel_for(100,
                               [](std::size_t i) {
                                 if (i == 37) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);

  // Nested regions run serially inside the worker.
  std::atomic<int> inner{0};
  parallel_for(8, [&](std::size_t) { parallel_for(8, [&](std::size_t) { inner.fetch_add(1); }); });
  CHECK(inner.load() == 64);
  set_thread_count(saved);
}

TEST_CASE("block partition depends only on the item count") {
  CHECK(block_count(0) == 0);
  CHECK(block_count(1) == 1);
  CHECK(block_count(kBlockSize) == 1);
  CHECK(block_count(kBlockSize + 1) == 2);
}
