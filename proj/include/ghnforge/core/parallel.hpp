#pragma once

#include <cstdint>
#include <functional>

namespace ghnforge {

// Worker pool shared by all numeric kernels. Partitioning is a pure function
// of (n, worker_count) and every call site writes disjoint ranges or merges
// per-chunk results in chunk order, so results are identical for any worker
// count. The pool is created lazily on first use.
void set_worker_count(int n);
int worker_count();

// Runs fn(begin, end) over a static partition of [0, n) into worker_count
// contiguous chunks. Blocks until all chunks finish. fn must not touch
// overlapping state across chunks.
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

// Number of chunks parallel_for will use for a range of size n, and the
// bounds of chunk c. Exposed so reductions can allocate per-chunk buffers.
int chunk_count(int64_t n);
std::pair<int64_t, int64_t> chunk_bounds(int64_t n, int chunk);

// As parallel_for but fn also receives the chunk index, for per-chunk
// scratch buffers that get merged in order afterwards.
void parallel_for_chunked(int64_t n, const std::function<void(int, int64_t, int64_t)>& fn);

}  // namespace ghnforge
