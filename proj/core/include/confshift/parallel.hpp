#pragma once

#include <cstddef>
#include <functional>

namespace confshift {

//! Worker count from CONFSHIFT_THREADS (unset or 0 = hardware concurrency).
std::size_t default_thread_count();

//! Runs body(i) for i in [0, n) on up to `threads` workers (0 = default).
//! Each index is processed exactly once; callers write results into
//! per-index slots so the outcome does not depend on scheduling.
//! The first exception thrown by any body is rethrown on the caller.
void parallel_for(std::size_t n,
                  const std::function<void(std::size_t)>& body,
                  std::size_t threads = 0);

} // namespace confshift
