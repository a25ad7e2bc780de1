#pragma once

#include <cstddef>
#include <functional>

namespace vida {

// Worker count used by the data-parallel loops inside the library.
// Defaults to 1; 0 means hardware concurrency.
void set_thread_count(unsigned threads);
unsigned thread_count();

// Runs body(i) for i in [0, n). Iterations must be independent; results are
// identical for any thread count as long as each body writes only its own slot.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace vida
