#pragma once

#include <cstddef>
#include <functional>

namespace ciams {

/// Number of worker threads used by parallel_for. 0 selects hardware concurrency.
void set_thread_count(unsigned threads);
unsigned thread_count();

/// Runs body(i) for i in [0, n). Each index runs exactly once; callers write
/// results into pre-sized slots so the outcome never depends on scheduling.
/// The first exception thrown by any body is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace ciams
