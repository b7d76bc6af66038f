#pragma once
#include <cstddef>
#include <functional>

namespace vmstab {

// Worker cap for library-internal loops. 0 = hardware concurrency.
void set_max_workers(int n);
int max_workers();

// Runs body(begin, end, chunk) over [0, n) in contiguous chunks. Chunk boundaries depend only on
// n and the chunk count, so per-chunk partial results combined in chunk order are reproducible
// for any worker count.
void parallel_chunks(size_t n, int chunks, const std::function<void(size_t, size_t, int)>& body);

// Default chunk count for deterministic reductions (fixed, independent of the worker cap).
constexpr int kReductionChunks = 64;

}  // namespace vmstab
