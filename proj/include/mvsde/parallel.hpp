#pragma once

#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace mvsde {

// Runs fn(begin, end) on `workers` threads over contiguous index chunks.
// Chunk boundaries depend only on (workers, n); every particle is written by
// exactly one thread and all randomness is per-particle, so results are
// bit-identical for any worker count.
inline void parallel_for(int workers, int n, const std::function<void(int, int)>& fn) {
    if (n <= 0) return;
    if (workers < 1) workers = 1;
    if (workers > n) workers = n;
    if (workers == 1) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(workers) - 1);
    std::exception_ptr first_error = nullptr;
    std::mutex error_mutex;
    auto run_chunk = [&](int begin, int end) {
        try {
            fn(begin, end);
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
        }
    };
    const int base = n / workers, extra = n % workers;
    int begin = 0;
    for (int w = 0; w < workers; ++w) {
        const int len = base + (w < extra ? 1 : 0);
        const int end = begin + len;
        if (w + 1 == workers)
            run_chunk(begin, end);
        else
            threads.emplace_back(run_chunk, begin, end);
        begin = end;
    }
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace mvsde
