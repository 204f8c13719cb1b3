#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace bart {

/// Worker count for `requested` (0 = hardware concurrency), capped by the
/// BART_IRL_THREADS environment variable when it is set.
std::size_t worker_count(std::size_t requested = 0);

/// Runs fn(k) for k in [0, n) on up to `workers` threads with a static,
/// contiguous partition. fn must only write to slot k of its outputs, so
/// results do not depend on scheduling.
template <class Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
    if (workers == 1 || n < 2 * workers) {
        for (std::size_t k = 0; k < n; ++k) fn(k);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t k = lo; k < hi; ++k) fn(k);
        });
    }
}

}  // namespace bart
