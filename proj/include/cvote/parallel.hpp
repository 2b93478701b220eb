#pragma once

#include <cstddef>
#include <functional>

namespace cvote {

/// Global worker count for parallel_for. 0 (the default) means "resolve":
/// the CONSISTENT_VOTE_THREADS environment variable if set, otherwise the
/// hardware concurrency.
void set_max_threads(int n);
int resolve_threads();

/// Runs fn(i) for i in [0, n), distributing contiguous chunks over worker
/// threads. Work items must be independent; results must be written to
/// per-index slots so the outcome is order-independent. The first exception
/// thrown by any worker is rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace cvote
