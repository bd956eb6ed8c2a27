#pragma once

#include <cstddef>
#include <functional>

namespace lpnsr {

// Worker cap: min(hardware, LPNSR_THREADS when set). At least 1.
int worker_count();

// Runs fn(i) for i in [0, n). Work items must be independent; each writes
// only its own slot, so results do not depend on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace lpnsr
