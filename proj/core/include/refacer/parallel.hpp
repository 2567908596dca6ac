#pragma once

#include <cstddef>
#include <functional>

namespace refacer {

/// Runs body(i) for i in [0, n) on up to `threads` workers with static
/// contiguous partitioning. Bodies must write disjoint outputs; results are
/// then independent of the thread count. The first exception is rethrown.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace refacer
