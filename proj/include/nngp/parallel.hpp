#pragma once

#include <cstddef>
#include <functional>

namespace nngp {

// Process-wide worker count used by parallel_for. Defaults to 1; the CLI sets
// it from --threads. Results never depend on this value: each index is
// computed independently and written to its own slot.
void set_worker_threads(unsigned count);
unsigned worker_threads();

// Runs body(i) for i in [0, count). The first exception thrown by any worker
// is rethrown on the calling thread after all workers have joined.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace nngp
