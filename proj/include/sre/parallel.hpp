#pragma once

#include "sre/types.hpp"

#include <functional>

namespace sre {

// Worker count: `requested` if non-zero, else hardware concurrency; always
// capped by the SRE_THREADS environment variable when it is set.
unsigned worker_count(unsigned requested = 0);

// Runs fn(0..n-1) on up to `workers` threads. Tasks must write only to their
// own slot of any shared output. The first exception thrown by a task is
// rethrown after all workers finish.
void parallel_for(Index n, unsigned workers, const std::function<void(Index)>& fn);

}  // namespace sre
