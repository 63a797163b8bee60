#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace mdlm {

// Worker count for evaluation/dataset phases. Training itself stays
// single-threaded. MDLM_THREADS overrides.
inline int default_threads() {
    if (const char* env = std::getenv("MDLM_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) {
            return n;
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(i) for i in [0, n). Callers index into preallocated result slots,
// so output is identical for any worker count.
inline void parallel_for(int n, int num_threads, const std::function<void(int)>& fn) {
    if (n <= 0) {
        return;
    }
    num_threads = std::min(num_threads, n);
    if (num_threads <= 1) {
        for (int i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> workers;
    workers.reserve(num_threads);
    for (int w = 0; w < num_threads; ++w) {
        workers.emplace_back([&] {
            for (;;) {
                const int i = next.fetch_add(1, std::memory_order_relaxed);
                if (i >= n || failed.load(std::memory_order_relaxed)) {
                    return;
                }
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) {
                        first_error = std::current_exception();
                    }
                    failed.store(true, std::memory_order_relaxed);
                    return;
                }
            }
        });
    }
    for (auto& t : workers) {
        t.join();
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
}

} // namespace mdlm
