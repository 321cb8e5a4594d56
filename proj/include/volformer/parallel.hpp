#pragma once

#include <cstddef>
#include <functional>

namespace volformer {

// Worker count: VOLFORMER_THREADS when set to a positive integer, otherwise
// the hardware concurrency (at least 1).
std::size_t max_threads();

// Runs fn(i) for i in [0, n). Each index is handled by exactly one worker and
// results must be written to index-addressed slots, so the outcome does not
// depend on scheduling. The first exception thrown by any worker is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace volformer
