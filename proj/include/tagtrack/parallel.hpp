#pragma once

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace tagtrack {

// Thread cap: TAGTRACK_THREADS (1 = fully serial). Loops parallelized with
// par_for give each index to exactly one thread and every output element is
// accumulated wholly by its owner, so results are bitwise identical for any
// thread count.
inline int thread_count() {
    static const int n = [] {
        if (const char* env = std::getenv("TAGTRACK_THREADS")) {
            int v = std::atoi(env);
            if (v >= 1) return v;
        }
        unsigned hc = std::thread::hardware_concurrency();
        return hc ? static_cast<int>(hc) : 1;
    }();
    return n;
}

template <typename Func>
void par_for(int n, Func f) {
    int threads = std::min(thread_count(), n);
    if (threads <= 1) {
        for (int i = 0; i < n; ++i) f(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    // contiguous blocks, fixed assignment
    int chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        int lo = t * chunk, hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &f] {
            for (int i = lo; i < hi; ++i) f(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace tagtrack
