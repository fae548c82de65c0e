#pragma once

#include <cstddef>
#include <functional>

namespace quantband {

// Process-wide worker count. Defaults to QUANTBAND_THREADS when set, else 1.
int num_threads();
void set_num_threads(int threads);

// Runs body(i) for i in [0, count). Work is split into contiguous static
// chunks, so callers that write disjoint slots get results independent of
// the thread count. Calls issued from inside a worker run serially.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace quantband
