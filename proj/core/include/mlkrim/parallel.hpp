#pragma once

#include <cstddef>
#include <functional>

namespace mlkrim {

// Worker cap shared by every parallel loop in the library. 0 selects the
// hardware concurrency.
void set_worker_count(std::size_t workers);
std::size_t worker_count();

// Runs body(i) for i in [0, n). Iterations must touch disjoint data; results
// do not depend on the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace mlkrim
