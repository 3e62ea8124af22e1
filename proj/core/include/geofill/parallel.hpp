#pragma once

#include <cstddef>
#include <functional>

namespace geofill {

/// Worker count: GEOFILL_THREADS when set (>= 1), otherwise the hardware
/// concurrency.
int thread_count();

/// Runs body(block) for block = 0 .. n_blocks-1. Blocks may execute on any
/// worker in any order; callers reduce per-block results in block order, so
/// results never depend on the thread count.
void parallel_blocks(int n_blocks, const std::function<void(int)>& body);

/// Number of fixed-size blocks covering n items.
inline int block_count(int n, int block_size) { return (n + block_size - 1) / block_size; }

}  // namespace geofill
