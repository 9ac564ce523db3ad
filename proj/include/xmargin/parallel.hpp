#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace xmargin {

/// Thread cap from XMARGIN_THREADS; absent or invalid means sequential.
inline std::size_t configured_threads() {
    const char* raw = std::getenv("XMARGIN_THREADS");
    if (raw == nullptr) return 1;
    try {
        const long v = std::stol(raw);
        return v >= 1 ? static_cast<std::size_t>(v) : 1;
    } catch (const std::exception&) {
        return 1;
    }
}

/// Runs body(i) for i in [0, n) on up to `threads` workers. Each index is
/// handled exactly once, so callers writing results by index get the same
/// output as a sequential loop. The first exception (lowest index) is
/// rethrown after all workers stop.
template <class Body>
void parallel_for(std::size_t n, std::size_t threads, Body&& body) {
    threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    std::size_t error_index = n;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (i < error_index) {
                    error_index = i;
                    error = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

} // namespace xmargin
