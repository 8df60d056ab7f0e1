#pragma once

#include <cstddef>
#include <functional>

namespace tacsim {

// Worker count used by parallel_for. Defaults to the TACSIM_THREADS
// environment variable, else std::thread::hardware_concurrency().
int thread_count();
void set_thread_count(int n);  // n <= 0 restores the default

// Splits [begin, end) into contiguous chunks, one per worker. The body
// receives a sub-range; callers must keep results independent of the split.
void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace tacsim
