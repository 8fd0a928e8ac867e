// SPDX-License-Identifier: MIT
/**
 * Deterministic replication fan-out.
 *
 * Work items are claimed from an atomic counter by a fixed pool of threads;
 * every result is stored at its replication index, so the output never
 * depends on the thread count or on scheduling.
 */
#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rbbm {

inline unsigned default_threads() {
    return std::max(1u, std::thread::hardware_concurrency());
}

/// results[i] = fn(i) for i in [0, n), computed on `threads` workers.
template <class Fn>
auto parallel_map(std::uint64_t n, unsigned threads, Fn&& fn) {
    using R = decltype(fn(std::uint64_t{0}));
    std::vector<R> out(n);
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::uint64_t>(n, 1))));
    if (threads == 1) {
        for (std::uint64_t i = 0; i < n; ++i) out[i] = fn(i);
        return out;
    }
    std::atomic<std::uint64_t> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    auto worker = [&] {
        for (;;) {
            const std::uint64_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                out[i] = fn(i);
            } catch (...) {
                std::lock_guard lk(error_mu);
                if (!error) error = std::current_exception();
                next = n;
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
    return out;
}

} // namespace rbbm
