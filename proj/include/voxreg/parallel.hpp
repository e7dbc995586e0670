#pragma once

#include <functional>

namespace voxreg::threading {

// Process-wide worker count for voxel-parallel loops. 0 resets to the
// hardware concurrency. Thread-safe to set between operations.
void set_num_threads(int n);
int num_threads();

// Runs fn over contiguous, disjoint chunks of [0, n). Each index is handled
// by exactly one worker and workers only write disjoint state, so results are
// identical for every thread count. Small ranges run inline.
void parallel_for(long long n, const std::function<void(long long, long long)>& fn);

} // namespace voxreg::threading
