#pragma once

#include <cstddef>
#include <functional>

namespace polyeit {

/// Process-wide cap on worker threads (at least 1).
void set_thread_limit(unsigned n);
unsigned thread_limit();

/// Runs body(i) for i in [0, n). Each index is handled by exactly one worker;
/// results must go to per-index slots so that output does not depend on
/// scheduling. The first exception thrown is rethrown after all workers stop.
/// Nested calls from inside a worker run serially.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace polyeit
