#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clenet/tensor.hpp"

namespace clenet {

// One record per parameterized unit. The dims describe the weight tensor;
// the bias length is implied by rank (rank 4 conv -> dims[0] out channels,
// rank 2 fully connected -> dims[1] output units).
struct CheckpointRecord {
  std::string name;
  Shape dims;
  std::vector<float> weights;
  std::vector<float> bias;
};

struct CheckpointMeta {
  uint8_t regime = 255;  // 0 DT, 1 SFT, 2 DFT, 255 unset
  uint64_t iteration = 0;
  uint64_t seed = 0;
};

// Binary layout (all little-endian):
//   magic "CLEN", u32 version, u32 record count,
//   per record: u16 name length, name bytes, u8 rank, u64 dims[rank],
//               f32 weights[prod(dims)], f32 bias[implied],
//   trailer: u8 regime, u64 iteration, u64 seed.
struct Checkpoint {
  uint32_t version = 1;
  std::vector<CheckpointRecord> records;
  CheckpointMeta meta;

  const CheckpointRecord* find(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace clenet
