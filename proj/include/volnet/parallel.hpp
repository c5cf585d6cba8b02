// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace volnet {

/// Worker count: VOLNET_THREADS if set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
std::size_t worker_count();

/// Runs body(i) for i in [0, n). Iterations are distributed over worker
/// threads; each i runs exactly once and must write disjoint memory, so the
/// result does not depend on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace volnet
