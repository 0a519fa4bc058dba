#pragma once

#include <cstdint>
#include <functional>

namespace covbench::bench {

// Number of workers to use: COVBENCH_WORKERS when set, otherwise the
// hardware concurrency.
int default_workers();

// Runs fn(0..n-1) across up to `workers` threads. Exceptions are collected
// and the first one rethrown after all threads join. workers <= 1 runs
// inline.
void parallel_for(int64_t n, int workers, const std::function<void(int64_t)>& fn);

}  // namespace covbench::bench
