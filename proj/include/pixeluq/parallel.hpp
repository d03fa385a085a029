#pragma once

#include <cstddef>
#include <functional>

namespace pixeluq {

// Worker count: hardware concurrency, capped by the PIXEL_UQ_THREADS environment variable.
std::size_t worker_count();

// Runs fn(i) for i in [0, n) on up to worker_count() threads. Exceptions from
// workers are rethrown on the calling thread (the first one wins).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace pixeluq
