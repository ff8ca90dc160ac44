#include "varimatch/parallel.hpp"

#include <atomic>
#include <thread>
#include <vector>

namespace varimatch {

namespace {
std::atomic<int> g_thread_count{0};
}

void set_thread_count(int count) { g_thread_count.store(count < 0 ? 0 : count); }

int thread_count() {
    int c = g_thread_count.load();
    if (c == 0) {
        unsigned hw = std::thread::hardware_concurrency();
        c = hw == 0 ? 1 : static_cast<int>(hw);
    }
    return c;
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
    const int workers = thread_count();
    if (workers <= 1 || count < 2) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    const std::size_t nw = std::min<std::size_t>(static_cast<std::size_t>(workers), count);
    std::vector<std::thread> pool;
    pool.reserve(nw);
    const std::size_t chunk = (count + nw - 1) / nw;
    for (std::size_t w = 0; w < nw; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(count, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace varimatch
