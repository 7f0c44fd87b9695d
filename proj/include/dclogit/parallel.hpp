#pragma once

#include <algorithm>
#include <mutex>
#include <thread>
#include <vector>

namespace dclogit {

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    unsigned hc = std::thread::hardware_concurrency();
    return hc ? static_cast<int>(hc) : 1;
}

// Runs fn(i) for i in [0, n). Each index must write only to its own output
// slots; results are then reduced by the caller in index order, so the
// outcome is bit-identical for any thread count.
template <typename Fn>
void parallel_for(size_t n, int threads, Fn&& fn) {
    threads = std::min<size_t>(resolve_threads(threads), n == 0 ? 1 : n);
    if (threads <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    std::exception_ptr err;
    std::mutex err_mu;
    for (int t = 0; t < threads; ++t) {
        size_t lo = n * t / threads;
        size_t hi = n * (t + 1) / threads;
        pool.emplace_back([&, lo, hi] {
            try {
                for (size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!err) err = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

} // namespace dclogit
