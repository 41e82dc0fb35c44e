#pragma once

#include <cstddef>
#include <functional>

namespace cdpforge {

/// Resolves a worker count: a positive request is used as-is, zero falls back
/// to $CDP_FORGE_THREADS and then to the number of hardware threads.
std::size_t resolve_threads(std::size_t requested);

/// Runs body(i) for i in [0, count) on up to `threads` workers. Each index is
/// processed exactly once; callers write results into per-index slots and
/// reduce them afterwards in index order, which keeps results independent of
/// the worker count. The first exception thrown by any body is rethrown.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace cdpforge
