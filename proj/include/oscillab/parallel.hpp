#pragma once

#include <cstddef>
#include <functional>

namespace oscillab {

// Worker count: set_thread_count() if called, else OSCILLAB_THREADS, else hardware concurrency.
int thread_count();
void set_thread_count(int n);

// Runs body(i) for i in [begin, end) over contiguous static chunks. Each index is handled by
// exactly one worker, so per-index results do not depend on the thread count.
void parallel_for(std::ptrdiff_t begin, std::ptrdiff_t end,
                  const std::function<void(std::ptrdiff_t)>& body);

}  // namespace oscillab
