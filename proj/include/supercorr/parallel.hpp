#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace supercorr {

// Static range split over n_threads workers. Each chunk writes disjoint
// outputs; inside a chunk the iteration order is ascending, so results do not
// depend on the thread count.
template <typename Fn>
void parallel_for(int n_threads, std::size_t begin, std::size_t end, Fn&& body) {
    const std::size_t count = end > begin ? end - begin : 0;
    if (count == 0) return;
    if (n_threads <= 1 || count < 2048) {
        body(begin, end);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(n_threads, count);
    const std::size_t chunk = (count + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = begin + w * chunk;
        const std::size_t hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&body, lo, hi] { body(lo, hi); });
    }
    for (auto& th : pool) th.join();
}

}  // namespace supercorr
