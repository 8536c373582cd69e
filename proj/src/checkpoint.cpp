#include "sar/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <memory>

#include "sar/common.hpp"

namespace sar {

namespace {

constexpr char kMagic[8] = {'S', 'A', 'R', 'C', 'K', 'P', 'T', '\0'};
constexpr uint32_t kVersion = 1;

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) fclose(f);
  }
};
using File = std::unique_ptr<FILE, FileCloser>;

void write_bytes(FILE* f, const void* p, size_t n, const std::string& path) {
  if (fwrite(p, 1, n, f) != n) throw ArtifactError("short write to checkpoint " + path);
}

void read_bytes(FILE* f, void* p, size_t n, const std::string& path) {
  if (fread(p, 1, n, f) != n) throw ArtifactError("truncated checkpoint " + path);
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  File f(fopen(path.c_str(), "wb"));
  if (!f) throw ArtifactError("cannot open checkpoint for writing: " + path);
  write_bytes(f.get(), kMagic, sizeof(kMagic), path);
  write_bytes(f.get(), &kVersion, sizeof(kVersion), path);
  write_bytes(f.get(), &ckpt.config_hash, sizeof(ckpt.config_hash), path);
  write_bytes(f.get(), &ckpt.step, sizeof(ckpt.step), path);
  const uint32_t count = static_cast<uint32_t>(ckpt.arrays.size());
  write_bytes(f.get(), &count, sizeof(count), path);
  for (const auto& [name, vals] : ckpt.arrays) {
    const uint32_t len = static_cast<uint32_t>(name.size());
    write_bytes(f.get(), &len, sizeof(len), path);
    write_bytes(f.get(), name.data(), len, path);
    const uint64_t n = vals.size();
    write_bytes(f.get(), &n, sizeof(n), path);
    write_bytes(f.get(), vals.data(), n * sizeof(double), path);
  }
}

Checkpoint load_checkpoint(const std::string& path, uint64_t expect_hash) {
  File f(fopen(path.c_str(), "rb"));
  if (!f) throw ArtifactError("checkpoint not found: " + path);
  char magic[8];
  read_bytes(f.get(), magic, sizeof(magic), path);
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ArtifactError("not a checkpoint file: " + path);
  }
  uint32_t version = 0;
  read_bytes(f.get(), &version, sizeof(version), path);
  if (version != kVersion) {
    throw ArtifactError("unsupported checkpoint version " + std::to_string(version) + " in " +
                        path);
  }
  Checkpoint ckpt;
  read_bytes(f.get(), &ckpt.config_hash, sizeof(ckpt.config_hash), path);
  read_bytes(f.get(), &ckpt.step, sizeof(ckpt.step), path);
  if (expect_hash != 0 && ckpt.config_hash != expect_hash) {
    throw ArtifactError("checkpoint config hash mismatch for " + path);
  }
  uint32_t count = 0;
  read_bytes(f.get(), &count, sizeof(count), path);
  for (uint32_t i = 0; i < count; ++i) {
    uint32_t len = 0;
    read_bytes(f.get(), &len, sizeof(len), path);
    std::string name(len, '\0');
    read_bytes(f.get(), name.data(), len, path);
    uint64_t n = 0;
    read_bytes(f.get(), &n, sizeof(n), path);
    std::vector<double> vals(n);
    read_bytes(f.get(), vals.data(), n * sizeof(double), path);
    ckpt.arrays.emplace(std::move(name), std::move(vals));
  }
  return ckpt;
}

}  // namespace sar
