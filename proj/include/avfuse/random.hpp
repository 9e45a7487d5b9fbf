#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace avfuse {

/// Derives an independent stream seed from the master seed and a stable key
/// such as "agent:3/sensor:0" or "link:0->1".
std::uint64_t stream_seed(std::uint64_t master, std::string_view key);

// Distributions are implemented here rather than taken from <random> because
// the standard ones are not specified bit-for-bit across library vendors.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal(double mean, double sigma);
  bool bernoulli(double p) { return uniform() < p; }
  std::uint32_t poisson(double mean);

 private:
  std::mt19937_64 engine_;
};

}  // namespace avfuse
