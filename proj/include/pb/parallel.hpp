#pragma once

#include <cstddef>
#include <functional>

namespace pb {

// Worker count from the PB_JOBS environment variable, else the hardware
// concurrency (at least 1).
std::size_t default_jobs();

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Each index runs exactly
// once; the exception thrown for the lowest failing index is rethrown after all workers
// finish.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)> &fn);

} // namespace pb
