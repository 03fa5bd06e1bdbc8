#ifndef MOLBO_PARALLEL_HPP
#define MOLBO_PARALLEL_HPP

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace molbo {

/// Runs fn(begin, end) over contiguous shards of [0, n). Shards are fixed by
/// (n, jobs) only, so results written per index are independent of scheduling.
/// The first exception thrown by any shard is rethrown on the caller.
template <class Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn&& fn) {
    if (n == 0) return;
    jobs = std::max(1u, jobs);
    const std::size_t shards = std::min<std::size_t>(jobs, n);
    if (shards == 1) {
        fn(std::size_t{0}, n);
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> workers;
        workers.reserve(shards);
        const std::size_t chunk = (n + shards - 1) / shards;
        for (std::size_t s = 0; s < shards; ++s) {
            const std::size_t begin = s * chunk;
            const std::size_t end = std::min(n, begin + chunk);
            if (begin >= end) break;
            workers.emplace_back([&, begin, end] {
                try {
                    fn(begin, end);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
}

} // namespace molbo

#endif
