#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace mvsim {

/// Process-wide worker count used by parallel loops. Defaults to 1.
void set_thread_count(unsigned n);
unsigned thread_count();

/// Runs body(begin, end) over a static partition of [0, n). Each index is
/// written by exactly one worker; callers reduce afterwards in index order,
/// so results never depend on the worker count.
template <class Body>
void parallel_for(std::size_t n, Body&& body, std::size_t grain = 2048) {
    const std::size_t workers =
        std::min<std::size_t>(thread_count(), (n + grain - 1) / std::max<std::size_t>(grain, 1));
    if (workers <= 1) {
        body(std::size_t{0}, n);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 1; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&body, begin, end] { body(begin, end); });
    }
    body(std::size_t{0}, std::min(n, chunk));
}

}  // namespace mvsim
