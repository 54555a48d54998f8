#pragma once

#include <cstddef>
#include <functional>

namespace dixon {

// Worker count from DIXON_THREADS. 0 selects strict serial execution; unset
// falls back to the hardware concurrency.
unsigned configured_threads();

bool strict_deterministic_mode();

// Runs fn(i) for i in [0, n). Each index must write only its own outputs; the
// first exception thrown by any worker is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace dixon
