#pragma once

#include <cstddef>
#include <functional>

namespace ems {

/// Sets the worker count used by parallel_for (0 = hardware concurrency).
void set_thread_count(std::size_t n);
std::size_t thread_count();

/// Runs body(i) for i in [0, n). Each index is executed exactly once; callers
/// write results into per-index slots so output never depends on scheduling.
/// Nested calls from inside a worker run serially.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

} // namespace ems
