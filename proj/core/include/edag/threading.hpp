#pragma once

#include <cstdint>
#include <functional>

namespace edag {

// Process-wide worker cap for per-document stages and large matmuls.
// Partitioning is by disjoint index ranges, so results are identical
// for any thread count.
void set_num_threads(int n);
int num_threads();

// Runs fn(begin, end) over a partition of [0, n). Falls back to a single
// inline call when n is small or only one thread is configured.
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

}  // namespace edag
