#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace rdflab {

namespace detail {
inline std::atomic<int>& thread_setting() {
    static std::atomic<int> value{0};
    return value;
}
}  // namespace detail

/// Sets the worker count used by field operations (0 = auto).
inline void set_threads(int count) { detail::thread_setting().store(std::max(0, count)); }

/// Effective worker count: explicit setting, then RDFLAB_THREADS, then hardware.
inline int thread_count() {
    int n = detail::thread_setting().load();
    if (n > 0) return n;
    if (const char* env = std::getenv("RDFLAB_THREADS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs body(begin, end) over [0, count) split into contiguous blocks.
/// Bodies must only write to their own block.
template <class Body>
void parallel_for(std::size_t count, Body&& body) {
    const int workers = std::min<std::size_t>(static_cast<std::size_t>(thread_count()), count);
    if (workers <= 1) {
        if (count > 0) body(std::size_t{0}, count);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    const std::size_t chunk = (count + static_cast<std::size_t>(workers) - 1) / static_cast<std::size_t>(workers);
    for (int w = 0; w < workers; ++w) {
        const std::size_t b = static_cast<std::size_t>(w) * chunk;
        const std::size_t e = std::min(count, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&body, b, e] { body(b, e); });
    }
    for (auto& t : pool) t.join();
}

/// Deterministic reduction: partial results are produced on fixed-size
/// blocks (independent of the worker count) and combined in block order.
template <class T, class Partial, class Combine>
T parallel_reduce(std::size_t count, T identity, Partial&& partial, Combine&& combine) {
    constexpr std::size_t block = 4096;
    const std::size_t blocks = (count + block - 1) / block;
    std::vector<T> parts(blocks, identity);
    parallel_for(blocks, [&](std::size_t b0, std::size_t b1) {
        for (std::size_t b = b0; b < b1; ++b) {
            parts[b] = partial(b * block, std::min(count, (b + 1) * block));
        }
    });
    T acc = identity;
    for (const T& p : parts) acc = combine(acc, p);
    return acc;
}

}  // namespace rdflab
