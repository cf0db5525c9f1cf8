#pragma once

#include <functional>

namespace sparsevit {

// Worker count, read once from SPARSEVIT_THREADS (default 1, floor 1).
int thread_count();

// Splits [0, n) into one contiguous chunk per worker and runs
// fn(begin, end, worker) on each. Runs inline when one worker suffices.
// Workers never share output elements, so results do not depend on the
// worker count.
void parallel_for(int n, const std::function<void(int, int, int)>& fn);

}  // namespace sparsevit
