#pragma once

#include <cstddef>
#include <functional>

namespace petkin {

/// 0 means one worker per hardware thread; negative values are rejected.
int resolve_threads(int requested);

/// Runs body(i) for every i in [0, n) on up to `threads` workers.
///
/// Work is split into fixed contiguous blocks so every index is processed by
/// exactly one call regardless of the worker count. If bodies throw, the
/// exception from the lowest failing index is rethrown after all workers join.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)> &body);

} // namespace petkin
