#pragma once

#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace pld {

// Worker count for parallel loops: PLDSIM_WORKERS if set, otherwise the
// hardware concurrency, never less than one.
inline unsigned worker_count() {
    if (const char* env = std::getenv("PLDSIM_WORKERS")) {
        const long v = std::atol(env);
        if (v >= 1) return unsigned(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw >= 1 ? hw : 1u;
}

// Static contiguous partition of [0, n) across workers. Each index is
// processed exactly once; results must be written to per-index slots (or
// otherwise merged order-independently) so the outcome does not depend on
// the worker count.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                         unsigned workers = 0) {
    if (workers == 0) workers = worker_count();
    if (n == 0) return;
    if (workers <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    if (workers > n) workers = unsigned(n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = n / workers;
    const std::size_t rem = n % workers;
    std::size_t begin = 0;
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t len = chunk + (w < rem ? 1 : 0);
        const std::size_t end = begin + len;
        pool.emplace_back([begin, end, &body] {
            for (std::size_t i = begin; i < end; ++i) body(i);
        });
        begin = end;
    }
    for (auto& t : pool) t.join();
}

}  // namespace pld
