#pragma once

#include <cstddef>
#include <functional>

namespace transcap {

/// Worker count from TRANSCAP_WORKERS, else the hardware concurrency (>= 1).
std::size_t default_workers();

/// Runs fn(i) for i in [0, n) on up to `workers` threads (0 = default_workers()).
/// Callers write results into slot i, so output order never depends on
/// scheduling. If any call throws, the exception of the lowest failing index
/// is rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

} // namespace transcap
