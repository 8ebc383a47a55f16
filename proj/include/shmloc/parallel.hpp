#pragma once

#include <cstddef>
#include <cstdlib>
#include <thread>
#include <vector>

namespace shmloc {

/// Worker count for stage-internal parallelism. Honors SHM_LOCATE_THREADS;
/// 0 or unset means auto (hardware concurrency).
inline std::size_t worker_count() {
    if (const char* env = std::getenv("SHM_LOCATE_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<std::size_t>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

/// Runs fn(i) for i in [0, n). Each index must be independent and write
/// only to its own output slot; results are then bit-identical for any
/// worker count.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const std::size_t workers = std::min(worker_count(), n == 0 ? 1 : n);
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace shmloc
