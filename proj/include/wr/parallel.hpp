#pragma once

#include <cstddef>
#include <functional>

namespace wr {

// Worker count from WR_WORKERS, else the hardware concurrency.
int workerCount();

// Runs f(i) for i in [0, n) over `workers` threads; each index is processed exactly once.
// Results must be written to per-index slots so that output is independent of scheduling.
void parallelFor(std::size_t n, const std::function<void(std::size_t)>& f, int workers = 0);

}  // namespace wr
