#pragma once

#include <cstdint>
#include <functional>

namespace dimal {

/// Current worker-thread cap (>= 1).
int max_threads();

/// Caps the number of worker threads; n <= 0 restores machine parallelism.
void set_max_threads(int n);

/// Runs fn(begin, end) over [0, n) split into contiguous blocks claimed
/// dynamically by workers. Callers must write results only to disjoint
/// locations; the block layout depends only on n and grain, never on the
/// thread count, so chunk-indexed reductions are reproducible.
void parallel_chunks(
    std::int64_t n, std::int64_t grain,
    const std::function<void(std::int64_t chunk, std::int64_t begin,
                             std::int64_t end)>& fn);

/// Convenience wrapper when the chunk index is irrelevant.
void parallel_for(std::int64_t n,
                  const std::function<void(std::int64_t, std::int64_t)>& fn,
                  std::int64_t grain = 1);

}  // namespace dimal
