#pragma once

#include <cstdint>
#include <functional>

namespace daq8 {

// Worker count: DAQ8_THREADS env var, 0 or unset = hardware concurrency.
int thread_count();

// Runs fn(i) for i in [0, n). Work is split into disjoint contiguous ranges,
// so callers that write disjoint output regions per index stay bit-reproducible
// regardless of the worker count.
void parallel_for(int64_t n, const std::function<void(int64_t)>& fn);

} // namespace daq8
