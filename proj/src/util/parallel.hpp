#pragma once

#include <cstddef>
#include <functional>

namespace cellclip {

// Worker count used by every internal pool. 0 restores the default
// (CELLCLIP_THREADS from the environment, else 1).
void set_thread_count(std::size_t n);
std::size_t thread_count();

// Runs body(i) for i in [0, n) over contiguous chunks. Each index must write
// only to its own output slot; results are then independent of thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace cellclip
