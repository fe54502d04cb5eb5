// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace risplan {

/// Worker count: RISPLAN_THREADS if set and positive, otherwise the
/// hardware concurrency.
unsigned thread_count();

/// Runs fn(i) for i in [0, n) over the worker pool. Each index is handled
/// exactly once; callers write results by index so output never depends on
/// scheduling. The first exception thrown by any worker is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace risplan
