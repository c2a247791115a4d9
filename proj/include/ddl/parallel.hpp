#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ddl {

inline unsigned default_workers()
{
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1u : hc;
}

// Runs fn(worker, index) for index in [0, count) on up to `workers` threads.
// Indices are claimed dynamically; the first exception is rethrown.
template <class Fn>
void parallel_for_index(std::size_t count, unsigned workers, Fn&& fn)
{
    if (workers <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i)
            fn(0u, i);
        return;
    }
    const unsigned nthreads = static_cast<unsigned>(std::min<std::size_t>(workers, count));
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto body = [&](unsigned w) {
        try {
            for (;;) {
                if (failed.load(std::memory_order_relaxed))
                    return;
                const std::size_t i = next.fetch_add(1);
                if (i >= count)
                    return;
                fn(w, i);
            }
        } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error)
                error = std::current_exception();
            failed = true;
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (unsigned w = 0; w < nthreads; ++w)
        pool.emplace_back(body, w);
    for (auto& t : pool)
        t.join();
    if (error)
        std::rethrow_exception(error);
}

} // namespace ddl
