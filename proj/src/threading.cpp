#include "sparsevit/threading.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace sparsevit {

int thread_count() {
    static const int n = [] {
        const char* s = std::getenv("SPARSEVIT_THREADS");
        if (!s) return 1;
        const int v = std::atoi(s);
        return v < 1 ? 1 : v;
    }();
    return n;
}

void parallel_for(int n, const std::function<void(int, int, int)>& fn) {
    const int workers = std::min(thread_count(), n < 1 ? 1 : n);
    if (workers <= 1) {
        fn(0, n, 0);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    const int chunk = (n + workers - 1) / workers;
    for (int t = 1; t < workers; ++t) {
        const int begin = t * chunk;
        const int end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back(fn, begin, end, t);
    }
    fn(0, std::min(n, chunk), 0);
    for (auto& th : pool) th.join();
}

}  // namespace sparsevit
