#pragma once

// Minimal fork-join helper. Work items must write to disjoint outputs; the
// caller reduces in a fixed order afterwards.

#include <cstddef>
#include <functional>

namespace lacecal::detail {

// Threads to use for `tasks` items, honouring LACE_CALIB_THREADS (0 = auto).
std::size_t worker_count(std::size_t tasks);

// Runs body(i) for i in [0, count). The first exception thrown by any item is
// rethrown on the calling thread after all workers stop.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace lacecal::detail
