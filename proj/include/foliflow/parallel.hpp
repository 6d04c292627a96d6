#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace foliflow {

/// Worker count: FOLIFLOW_THREADS when set to a positive integer, else all cores.
inline std::size_t worker_count() {
    if (const char* env = std::getenv("FOLIFLOW_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) return static_cast<std::size_t>(v);
        } catch (...) {
        }
    }
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Runs body(k) for k in [0, n) over contiguous chunks. Each index is
/// visited exactly once and bodies must only write to disjoint outputs, so
/// results never depend on the number of workers. The first exception
/// (in chunk order) is rethrown after all workers finish.
template <class Body>
void parallel_for(std::size_t n, Body&& body, std::size_t workers = worker_count()) {
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (std::size_t k = 0; k < n; ++k) body(k);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> failures(workers);
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, w, &body, &failures] {
            try {
                for (std::size_t k = lo; k < hi; ++k) body(k);
            } catch (...) {
                failures[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& f : failures)
        if (f) std::rethrow_exception(f);
}

}  // namespace foliflow
