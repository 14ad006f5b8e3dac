#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace kinkreg {

inline unsigned resolve_threads(int requested) {
    if (requested > 0) return static_cast<unsigned>(requested);
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1u;
}

// Static contiguous partition of [0, n); f(worker, i) must only write state
// owned by item i (or by worker-local scratch), so the result does not
// depend on the worker count or schedule.
template <class F>
void parallel_for_indexed(std::size_t n, int threads, F&& f) {
    const std::size_t t =
        std::min<std::size_t>(resolve_threads(threads), n == 0 ? 1 : n);
    if (t <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(std::size_t{0}, i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(t);
    std::exception_ptr first_error;
    std::mutex mu;
    for (std::size_t k = 0; k < t; ++k) {
        const std::size_t lo = n * k / t;
        const std::size_t hi = n * (k + 1) / t;
        pool.emplace_back([&, k, lo, hi] {
            try {
                for (std::size_t i = lo; i < hi; ++i) f(k, i);
            } catch (...) {
                std::lock_guard<std::mutex> g(mu);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

template <class F>
void parallel_for(std::size_t n, int threads, F&& f) {
    parallel_for_indexed(n, threads, [&](std::size_t, std::size_t i) { f(i); });
}

} // namespace kinkreg
