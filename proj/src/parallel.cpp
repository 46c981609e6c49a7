#include "rmfg/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace rmfg {

int thread_count() {
    static int cached = [] {
        if (const char* env = std::getenv("THREADS")) {
            const int v = std::atoi(env);
            if (v >= 1) return v;
        }
        const unsigned hw = std::thread::hardware_concurrency();
        return hw == 0 ? 1 : static_cast<int>(hw);
    }();
    return cached;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
    if (n == 0) return;
    const std::size_t n_chunks = (n + kParallelChunk - 1) / kParallelChunk;
    const int workers = thread_count();
    if (workers <= 1 || n_chunks <= 1) {
        body(0, n);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto run = [&] {
        while (true) {
            const std::size_t c = next.fetch_add(1);
            if (c >= n_chunks) break;
            const std::size_t begin = c * kParallelChunk;
            const std::size_t end = std::min(n, begin + kParallelChunk);
            body(begin, end);
        }
    };
    std::vector<std::thread> pool;
    const std::size_t spawn = std::min<std::size_t>(workers, n_chunks);
    pool.reserve(spawn);
    for (std::size_t i = 1; i < spawn; ++i) pool.emplace_back(run);
    run();
    for (auto& t : pool) t.join();
}

}  // namespace rmfg
