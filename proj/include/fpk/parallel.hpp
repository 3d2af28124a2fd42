#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace fpk {

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

/// Runs fn(block) for block in [0, nblocks) on up to `threads` workers.
/// Callers store per-block results and combine them in block order, so
/// reductions stay bit-reproducible for any thread count.
inline void for_each_block(int nblocks, int threads, const std::function<void(int)>& fn) {
    threads = resolve_threads(threads);
    if (threads <= 1 || nblocks <= 1) {
        for (int b = 0; b < nblocks; ++b) fn(b);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    auto worker = [&] {
        for (;;) {
            const int b = next.fetch_add(1);
            if (b >= nblocks || failed.load()) return;
            try {
                fn(b);
            } catch (...) {
                if (!failed.exchange(true)) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const int nworkers = std::min(threads, nblocks);
    pool.reserve(static_cast<std::size_t>(nworkers));
    for (int t = 0; t < nworkers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (failed.load() && error) std::rethrow_exception(error);
}

}  // namespace fpk
