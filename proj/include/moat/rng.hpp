#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace moat {

// 64-bit Mersenne twister with portable uniform/normal conversions, so a
// seed fixes the stream independently of the standard library.
//
// Seed splitting: child streams are seeded with splitmix64(parent_seed ^
// splitmix64(stream_id)). The CLI uses stream ids epoch (training shuffles),
// (chain << 32 | evidence) for samplers and 0x5eed for random inits.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::size_t below(std::size_t n);
  double normal();
  // Index drawn with probability proportional to weights (not all zero).
  std::size_t categorical(std::span<const double> weights);
  // Independent child stream, a function of the construction seed only.
  Rng split(std::uint64_t stream) const;

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace moat
