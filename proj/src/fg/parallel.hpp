#pragma once

#include <functional>

namespace fg {

// Worker cap from FLOWGAN_THREADS (0 or unset = hardware concurrency).
int worker_count();

// Runs fn(i) for i in [0,n). Work is split into contiguous blocks; each index
// writes only its own slot, so results are independent of the thread count.
void parallel_for(int n, const std::function<void(int)>& fn);

} // namespace fg
