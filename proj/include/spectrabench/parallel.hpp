#pragma once

#include <cstddef>
#include <functional>

namespace spectrabench {

/// Worker cap: SPECTRABENCH_THREADS when set (≥1), else hardware concurrency.
std::size_t worker_count();

/// Runs fn(i) for i in [0, n) on up to worker_count() threads. Callers write
/// results into pre-sized slots indexed by i, so output order never depends on
/// scheduling. Nested calls from inside a worker run sequentially. The first
/// exception thrown by any fn(i) is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace spectrabench
