#include "moat/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace moat {

namespace {
std::atomic<int> g_threads{1};
}

void set_num_threads(int threads) { g_threads.store(std::max(1, threads)); }
int num_threads() { return g_threads.load(); }

void parallel_for(std::size_t num_blocks, const std::function<void(std::size_t)>& fn) {
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(num_threads()), num_blocks);
  if (workers <= 1) {
    for (std::size_t b = 0; b < num_blocks; ++b) fn(b);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (std::size_t b = next++; b < num_blocks; b = next++) {
      try {
        fn(b);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::size_t block_count(std::size_t count, std::size_t max_blocks) { return std::min(count, max_blocks); }

BlockRange block_range(std::size_t count, std::size_t num_blocks, std::size_t block) {
  const std::size_t base = count / num_blocks;
  const std::size_t extra = count % num_blocks;
  const std::size_t begin = block * base + std::min(block, extra);
  return {begin, begin + base + (block < extra ? 1 : 0)};
}

}  // namespace moat
