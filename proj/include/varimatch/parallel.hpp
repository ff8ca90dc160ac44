#pragma once

#include <cstddef>
#include <functional>

namespace varimatch {

/// Global worker count for parallel loops. 0 means "use all hardware cores".
void set_thread_count(int count);
int thread_count();

/// Runs fn(i) for i in [0, count). Work is split into contiguous chunks across
/// worker threads. Callers must only write to disjoint, index-owned locations;
/// results are then independent of the thread count by construction.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

} // namespace varimatch
