#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tiger/nn/parameter_store.hpp"

namespace tiger::nn {

// Byte layout (all integers little-endian u32, values little-endian f32):
//   "TIGERCKP"                    8-byte magic
//   version                       currently 1
//   config_length, config bytes   UTF-8 YAML text of the model config
//   parameter_count
//   per parameter, in store order:
//     name_length, name bytes
//     rank, rank x dim
//     prod(dims) x f32 values, row-major

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointRecord {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::string config;
  std::vector<CheckpointRecord> records;
};

template <typename T>
Checkpoint make_checkpoint(const std::string& config, const ParameterStore<T>& store);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Copies records into the store. Names, order and shapes must match.
template <typename T>
void load_parameters(const Checkpoint& checkpoint, ParameterStore<T>& store);

}  // namespace tiger::nn
