#pragma once

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace divinv {

/// Resolve a thread-count request: 0 means "use hardware concurrency".
inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Static range split over std::thread workers. Each index is touched by
/// exactly one worker, so writes to disjoint outputs are race-free and the
/// result does not depend on the thread count.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    threads = resolve_threads(threads);
    if (threads <= 1 || n < 4096) {
        fn(std::size_t{0}, n);
        return;
    }
    std::size_t nt = std::min<std::size_t>(threads, n);
    std::size_t chunk = (n + nt - 1) / nt;
    std::vector<std::thread> pool;
    pool.reserve(nt);
    for (std::size_t t = 0; t < nt; ++t) {
        std::size_t lo = t * chunk;
        std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
    for (auto& th : pool) th.join();
}

/// Fixed-block pairwise summation. Blocks are summed left to right in index
/// order, so the result is bitwise identical for every thread count; block
/// partials may be computed concurrently.
template <class Fn>
double blocked_sum(std::size_t n, int threads, Fn&& term) {
    constexpr std::size_t kBlock = 4096;
    if (n == 0) return 0.0;
    std::size_t nblocks = (n + kBlock - 1) / kBlock;
    std::vector<double> partial(nblocks, 0.0);
    parallel_for(nblocks, threads, [&](std::size_t b0, std::size_t b1) {
        for (std::size_t b = b0; b < b1; ++b) {
            std::size_t lo = b * kBlock;
            std::size_t hi = std::min(n, lo + kBlock);
            double s = 0.0;
            for (std::size_t i = lo; i < hi; ++i) s += term(i);
            partial[b] = s;
        }
    });
    // pairwise reduce the block partials
    while (partial.size() > 1) {
        std::size_t half = (partial.size() + 1) / 2;
        for (std::size_t i = 0; i + half < partial.size(); ++i)
            partial[i] += partial[i + half];
        partial.resize(half);
    }
    return partial[0];
}

inline double blocked_dot(const std::vector<double>& a, const std::vector<double>& b, int threads = 1) {
    return blocked_sum(a.size(), threads, [&](std::size_t i) { return a[i] * b[i]; });
}

} // namespace divinv
