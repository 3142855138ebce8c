#pragma once

#include <cstdint>
#include <functional>

namespace fame {

// Number of worker threads (FAME_THREADS env override, else hardware).
int worker_count();

// Runs fn(begin_i, end_i) over contiguous blocks of [begin, end), one block
// per worker. Every index is handled by exactly one thread, so results are
// deterministic as long as callers write disjoint outputs and keep a fixed
// summation order inside each block. Small ranges run inline.
void parallel_blocks(std::int64_t begin, std::int64_t end,
                     const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace fame
