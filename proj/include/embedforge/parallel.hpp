#pragma once

#include <cstddef>
#include <functional>

namespace embedforge {

// Worker count: EMBEDFORGE_THREADS when set to a positive integer, otherwise
// the hardware concurrency (at least 1).
std::size_t worker_threads();

// Runs task(i) for i in [0, n) on up to `threads` threads. Each index is
// handled exactly once; callers write results into per-index slots so the
// outcome does not depend on scheduling. The first exception is rethrown.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& task);

}  // namespace embedforge
