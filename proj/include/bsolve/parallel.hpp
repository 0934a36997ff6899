#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace bsolve {

/// Worker count from BS_THREADS; 1 when unset or unparsable.
inline int threads_from_env()
{
    const char* s = std::getenv("BS_THREADS");
    if (!s) return 1;
    try {
        return std::max(1, std::stoi(s));
    } catch (const std::exception&) {
        return 1;
    }
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Callers write results by index, so
/// output does not depend on scheduling. The first exception thrown by any task is rethrown.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn)
{
    const auto workers = static_cast<std::size_t>(std::clamp<long long>(threads, 1, static_cast<long long>(n)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto run = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace bsolve
