#include "sar/rng.hpp"

namespace sar {

uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::vector<int64_t> RngStream::permutation(int64_t n) {
  std::vector<int64_t> p(n);
  for (int64_t i = 0; i < n; ++i) p[i] = i;
  // Fisher-Yates; identity is a valid draw.
  for (int64_t i = n - 1; i > 0; --i) {
    int64_t j = uniform_int(i + 1);
    std::swap(p[i], p[j]);
  }
  return p;
}

namespace {
uint64_t stream_seed(uint64_t global, const char* name) {
  return splitmix64(global ^ fnv1a64(name));
}
}  // namespace

RngStreams::RngStreams(uint64_t seed)
    : global_seed(seed),
      env(stream_seed(seed, "env")),
      policy_init(stream_seed(seed, "policy-init")),
      generator_init(stream_seed(seed, "generator-init")),
      permutation(stream_seed(seed, "permutation")),
      augmentation(stream_seed(seed, "augmentation")),
      action(stream_seed(seed, "action")),
      minibatch(stream_seed(seed, "minibatch")) {}

uint64_t RngStreams::env_instance_seed(int64_t idx) const {
  return splitmix64(stream_seed(global_seed, "env-instance") + static_cast<uint64_t>(idx));
}

RngStreams seed_everything(uint64_t global_seed) { return RngStreams(global_seed); }

RngStream eval_stream(uint64_t seed) { return RngStream(stream_seed(seed, "eval")); }

}  // namespace sar
