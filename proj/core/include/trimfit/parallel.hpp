#pragma once

#include <cstddef>
#include <functional>

namespace trimfit {

/// Worker cap from TRIMFIT_THREADS. Unset, empty or unparsable values and
/// 0 all mean sequential execution.
std::size_t threads_from_env();

/// Calls body(i) for every i in [0, count). With threads <= 1 the calls run
/// in order on the calling thread; otherwise indices are handed out to up
/// to `threads` workers. The first exception thrown is rethrown after all
/// workers join.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace trimfit
