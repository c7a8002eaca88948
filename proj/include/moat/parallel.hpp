#pragma once

#include <cstddef>
#include <functional>

namespace moat {

// Worker count for batch routines. Results never depend on it: work is cut
// into a fixed number of blocks that are reduced in block order.
void set_num_threads(int threads);
int num_threads();

// Runs fn(block) for every block in [0, num_blocks); the first exception
// thrown by any block is rethrown.
void parallel_for(std::size_t num_blocks, const std::function<void(std::size_t)>& fn);

// Splits [0, count) into at most max_blocks contiguous ranges.
struct BlockRange {
  std::size_t begin;
  std::size_t end;
};
BlockRange block_range(std::size_t count, std::size_t num_blocks, std::size_t block);
std::size_t block_count(std::size_t count, std::size_t max_blocks);

}  // namespace moat
