#ifndef FPGLMM_PARALLEL_HPP
#define FPGLMM_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace fpglmm {

// Worker cap for all parallel maps. 0 = hardware concurrency.
int max_threads();
void set_max_threads(int n);

// Runs fn(i) for i in [0,n). Each item must write only its own output slot;
// results are then identical for any worker count. The first exception
// (lowest index) is rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace fpglmm

#endif
