#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace sar {

/// Flat named-array snapshot, enough to restore every parameter tensor by
/// name. Optimizer state is deliberately not persisted.
struct Checkpoint {
  uint64_t config_hash = 0;
  int64_t step = 0;
  std::map<std::string, std::vector<double>> arrays;
};

/// Binary format: "SARCKPT\0", u32 version, u64 config hash, i64 step,
/// u32 entry count, then per entry u32 name length, name bytes, u64 value
/// count, raw little-endian doubles.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);

/// Throws ArtifactError on missing file, bad magic, or a config hash that
/// does not match `expect_hash` (pass 0 to skip the hash check).
Checkpoint load_checkpoint(const std::string& path, uint64_t expect_hash = 0);

}  // namespace sar
