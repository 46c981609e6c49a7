#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace rmfg {

// Number of worker threads: THREADS env var, else hardware concurrency.
int thread_count();

// Runs body(begin, end) over [0, n) split into fixed-size chunks. Chunk
// boundaries do not depend on the thread count, so any chunk-indexed
// output (and any reduction done serially over chunks afterwards) is
// reproducible for every THREADS value.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

constexpr std::size_t kParallelChunk = 1024;

// Chunked sum with a fixed combine order: per-chunk partials are computed in
// parallel and added serially by chunk index, so the result is bit-identical
// for every thread count.
template <class F>
double deterministic_sum(std::size_t n, F&& per_item) {
    if (n == 0) return 0.0;
    const std::size_t n_chunks = (n + kParallelChunk - 1) / kParallelChunk;
    std::vector<double> partial(n_chunks, 0.0);
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        double acc = 0.0;
        for (std::size_t i = begin; i < end; ++i) acc += per_item(i);
        partial[begin / kParallelChunk] = acc;
    });
    double total = 0.0;
    for (double v : partial) total += v;
    return total;
}

}  // namespace rmfg
