#pragma once

#include <cstddef>
#include <functional>

namespace affine {

/// Worker count: the value set by set_thread_count, else AFFINE_LAB_THREADS,
/// else the hardware concurrency. Always >= 1.
int thread_count();
void set_thread_count(int n);

/// Runs body(i) for i in [0, n) on `threads` workers (0 = thread_count()).
/// Each index is processed exactly once; the first exception is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body, int threads = 0);

}  // namespace affine
