#pragma once

#include <cstddef>
#include <functional>

namespace difflab {

/// Worker count used by parallel_for. Defaults to DIFFLAB_THREADS or the
/// hardware concurrency. Results never depend on this value.
std::size_t thread_count();
void set_thread_count(std::size_t n);

/// Calls body(i) for every i in [0, n). Iterations must be independent and
/// write only to slots owned by i.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

/// Fixed partition of n items into blocks of block_size; block boundaries
/// depend only on n so per-block random streams are thread-count invariant.
inline constexpr std::size_t kBlockSize = 512;

inline std::size_t block_count(std::size_t n, std::size_t block = kBlockSize) {
  return (n + block - 1) / block;
}

}  // namespace difflab
