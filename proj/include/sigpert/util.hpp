#pragma once

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace sigpert {

// Chunked parallel map over [0, n). Workers write to disjoint slots only;
// callers do any reduction sequentially afterwards so results do not depend
// on the thread count.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    unsigned hw = std::thread::hardware_concurrency();
    std::size_t workers = hw ? hw : 1;
    if (workers <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    if (workers > n) workers = n;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace sigpert
