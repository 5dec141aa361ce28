#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mgm/tensor.hpp"

namespace mgm {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// On-disk model snapshot: canonical config text, string metadata (step
// counters and the like), and named tensors in a stable order. The binary
// layout is magic "MGDC", u32 version, length-prefixed config, metadata
// block, tensor table (name, dtype, dims, little-endian payload), CRC32.
struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::string config_text;
  std::map<std::string, std::string> metadata;
  std::vector<std::pair<std::string, nn::Tensor>> tensors;

  const nn::Tensor* find(const std::string& name) const;
  std::int64_t meta_int(const std::string& key, std::int64_t fallback) const;
};

// IEEE CRC-32 (reflected, poly 0xEDB88320), the zlib/PNG variant.
std::uint32_t crc32_ieee(const unsigned char* data, std::size_t len);

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

// Copies checkpoint tensors into live parameters by name, bitwise.
// Missing names or shape mismatches throw rather than partially apply.
void restore_tensors(const Checkpoint& ck,
                     const std::vector<std::pair<std::string, nn::Tensor>>& named);

}  // namespace mgm
