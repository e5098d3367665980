#pragma once

#include <cstddef>
#include <functional>

namespace qpat {

/// Worker count used by parallel_for (default 1). Values < 1 select the
/// hardware concurrency.
void set_thread_count(int threads);
int thread_count();

/// Calls fn(i) for i in [0, n) using thread_count() workers with a fixed
/// contiguous partition. Callers write results by index and reduce serially,
/// so output does not depend on the worker count. The first exception thrown
/// by any worker is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace qpat
