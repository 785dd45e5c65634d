#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ear/bench/task.hpp"
#include "ear/model/config.hpp"
#include "ear/model/params.hpp"
#include "ear/model/sequence.hpp"
#include "ear/training/training.hpp"

namespace ear::bench {

using Bytes = std::vector<std::uint8_t>;

struct Dataset {
  TaskSpec spec;
  model::SequenceSet data;
};

// Dataset file: "EARD", u32 version, u32-length JSON task header, u64
// record count, then per record a u16 label and seq_len * d_token f32.
// All integers and floats little-endian.
inline constexpr std::uint32_t kDatasetVersion = 1;
Bytes encode_dataset(const Dataset& ds);
Dataset decode_dataset(const Bytes& bytes);
void write_dataset(const std::string& path, const Dataset& ds);
Dataset read_dataset(const std::string& path);

struct Checkpoint {
  model::ModelConfig model;
  training::TrainConfig train;
  TaskSpec task;
  model::ModelParams<float> params;
  /// Empty when the run kept no EMA.
  model::ModelParams<float> ema;
};

// Checkpoint file: "EARC", u32 version, u32-length JSON header holding the
// model, train and task configs, u32 tensor count, then per tensor a
// u32-length name, u8 dtype (0 = f32), u8 rank, rank u64 dims and the raw
// payload. EMA tensors follow the raw ones under an "ema." prefix.
inline constexpr std::uint32_t kCheckpointVersion = 1;
Bytes encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const Bytes& bytes);
void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

Bytes read_file(const std::string& path);
/// Writes to a sibling temporary and renames, so a failed write leaves no
/// partial file behind.
void write_file(const std::string& path, const Bytes& bytes);

}  // namespace ear::bench
