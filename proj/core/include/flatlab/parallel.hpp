#pragma once

// Index-parallel loops over grid points. Work is split into contiguous
// chunks and every index writes only its own slot, so reductions done by the
// caller over the result vector are independent of the thread count.

#include <cstddef>
#include <exception>
#include <functional>
#include <vector>

namespace flatlab {

/// Worker count: FLATLAB_THREADS when set to a positive integer, otherwise
/// the hardware concurrency (at least 1).
unsigned thread_count();

/// Calls fn(i) for i in [0, count). If workers throw, the exception from
/// the lowest-indexed chunk is rethrown after all workers finish.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

/// Evaluates fn at every index and returns the values in index order.
template <class T, class F>
std::vector<T> parallel_map(std::size_t count, F&& fn) {
  std::vector<T> out(count);
  parallel_for(count, [&](std::size_t i) { out[i] = fn(i); });
  return out;
}

}  // namespace flatlab
