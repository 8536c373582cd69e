#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace sar {

// splitmix64: cheap stateless mixer used to derive independent stream seeds
// from (global_seed, label) pairs.
uint64_t splitmix64(uint64_t x);
uint64_t fnv1a64(const std::string& s);

class RngStream {
 public:
  explicit RngStream(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  // Uniform integer in [0, n).
  int64_t uniform_int(int64_t n) {
    return std::uniform_int_distribution<int64_t>(0, n - 1)(engine_);
  }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

  std::vector<int64_t> permutation(int64_t n);

 private:
  std::mt19937_64 engine_;
};

// Named, independent streams split from one global seed. Consuming one
// stream never advances another, so enabling a feature (say, style mixing)
// cannot shift env layouts or weight init.
struct RngStreams {
  explicit RngStreams(uint64_t global_seed);

  uint64_t global_seed;
  RngStream env;             // layout seeds, style draws, env physics noise
  RngStream policy_init;     // actor-critic weight init
  RngStream generator_init;  // perturbation generator weight init
  RngStream permutation;     // style mixing batch permutations
  RngStream augmentation;    // translate / cutout parameters
  RngStream action;          // stochastic action sampling during collection
  RngStream minibatch;       // minibatch shuffling / replay sampling

  // Seed for the i-th parallel env instance.
  uint64_t env_instance_seed(int64_t idx) const;
};

RngStreams seed_everything(uint64_t global_seed);

// Stand-alone stream for evaluation episodes; independent from training
// streams so mid-training evals do not disturb collection.
RngStream eval_stream(uint64_t seed);

}  // namespace sar
