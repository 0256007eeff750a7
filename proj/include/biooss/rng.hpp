// Deterministic random number generation with named streams.
//
// All randomness in the library flows from one root seed. A consumer opens a
// stream by name ("init/B/layer0", "noise/drive", ...); the stream state is
// seeded from the root seed hashed with the name, so adding a new consumer
// never perturbs the draws of existing ones. The generator is splitmix64,
// fully specified here rather than delegated to std:: distributions, whose
// exact output sequences are implementation-defined and would break
// bit-reproducibility contracts across standard libraries.
#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace biooss {

// 64-bit FNV-1a hash of a stream name.
std::uint64_t fnv1a64(std::string_view s);

class Rng {
 public:
  // Opens the stream `name` derived from `root_seed`.
  Rng(std::uint64_t root_seed, std::string_view name);

  // Raw 64-bit splitmix64 output.
  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform01();

  // Uniform on [lo, hi).
  double uniform(double lo, double hi);

  // log-uniform on [lo, hi], lo > 0.
  double log_uniform(double lo, double hi);

  // Standard normal via Box-Muller (pairs cached).
  double normal();

  // +1.0 or -1.0 with equal probability.
  double rademacher();

  // Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n);

 private:
  std::uint64_t state_;
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

}  // namespace biooss
