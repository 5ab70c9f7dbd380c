#pragma once

#include <cstddef>
#include <functional>

namespace sinkcpd {

/// Worker count: SINKCPD_THREADS when set to a positive integer, otherwise
/// the hardware concurrency (at least 1).
std::size_t worker_count();

/// Calls body(i) for i in [0, n). Work is split into contiguous chunks over
/// worker_count() threads; callers write results to disjoint slots so the
/// outcome does not depend on the thread count. The first exception thrown
/// by any body is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace sinkcpd
