#ifndef OSCGRAPH_PARALLEL_HPP
#define OSCGRAPH_PARALLEL_HPP

// Minimal deterministic fork-join helper.  OSCGRAPH_THREADS caps the worker
// count (0 or unset = hardware concurrency); callers write results into
// preallocated slots so the schedule cannot reorder output.

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace oscgraph {

inline unsigned thread_cap() {
    long cap = 0;
    if (const char* env = std::getenv("OSCGRAPH_THREADS")) {
        char* end = nullptr;
        cap = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || cap < 0) cap = 0;
    }
    if (cap == 0) {
        const unsigned hw = std::thread::hardware_concurrency();
        cap = hw ? long(hw) : 1;
    }
    return unsigned(cap);
}

/// Runs body(i) for i in [0, n) over contiguous blocks on at most
/// thread_cap() threads; the first exception raised is rethrown.
template <class Body>
void parallel_for_index(std::size_t n, Body&& body) {
    const std::size_t workers = std::min<std::size_t>(std::max(1u, thread_cap()), n ? n : 1);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr first;
    std::mutex guard;
    const auto run = [&](std::size_t lo, std::size_t hi) {
        try {
            for (std::size_t i = lo; i < hi; ++i) body(i);
        } catch (...) {
            const std::lock_guard<std::mutex> lock(guard);
            if (!first) first = std::current_exception();
        }
    };
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 1; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        if (lo >= n) break;
        pool.emplace_back(run, lo, std::min(n, lo + chunk));
    }
    run(0, std::min(n, chunk));
    for (auto& t : pool) t.join();
    if (first) std::rethrow_exception(first);
}

}  // namespace oscgraph

#endif
