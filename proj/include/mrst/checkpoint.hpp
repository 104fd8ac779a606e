#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "mrst/losses.hpp"
#include "mrst/models.hpp"
#include "mrst/params.hpp"

namespace mrst {

inline constexpr uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[4] = {'M', 'R', 'S', 'T'};

// What a checkpoint records beyond the raw parameters. `kind` says which
// network the store parameterizes (e.g. "cin_generator"); `tasks` maps bank
// row i of a CIN generator to tasks[i] (empty for task-free networks).
struct CheckpointMeta {
  std::string kind;
  NetConfig net;
  LossConfig loss;
  std::vector<TaskId> tasks;
  int64_t step = 0;
  uint64_t seed = 0;
};

// On-disk layout: "MRST" magic, u32 LE format version, u64 LE header byte
// length, key-sorted JSON header (meta + parameter names/shapes/partition
// labels in store order), then raw little-endian f32 blocks in that order.
// load followed by save reproduces the file byte for byte.
void save_checkpoint(const std::filesystem::path& path,
                     const ParamStore<float>& params,
                     const CheckpointMeta& meta);

struct LoadedCheckpoint {
  ParamStore<float> params;
  CheckpointMeta meta;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

// FNV-1a 64 over the raw file bytes, as a lowercase hex string; recorded in
// restoration provenance sidecars.
std::string checkpoint_hash(const std::filesystem::path& path);

}  // namespace mrst
