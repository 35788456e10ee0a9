#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

#include "difflab/types.hpp"

namespace difflab {

/// SplitMix64 finalizer; bijective on 64-bit words.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// FNV-1a hash of a label, used to name substreams.
std::uint64_t label_hash(std::string_view label) noexcept;

/// Counter-style seed derivation: the result depends only on the master seed
/// and the ordered labels, never on call order or thread scheduling.
std::uint64_t derive_seed(std::uint64_t seed,
                          std::initializer_list<std::uint64_t> labels) noexcept;

/// A seeded random stream. Copying a stream copies its full state.
class Stream {
 public:
  explicit Stream(std::uint64_t seed);

  double normal();
  double uniform();  // in [0, 1)
  Vector normal_vector(int dim);
  /// Index drawn by inverse CDF from a non-decreasing cumulative table.
  std::size_t categorical(const std::vector<double>& cumulative);

  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Stream for the substream identified by (seed, labels...).
Stream substream(std::uint64_t seed, std::initializer_list<std::uint64_t> labels);

}  // namespace difflab
