#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace cmit {

/// One named parameter tensor in a checkpoint, row-major float64.
struct CheckpointRecord {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> data;
};

/// Binary checkpoint: ordered records plus an opaque config string.
/// Byte-stable for identical contents.
void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<CheckpointRecord>& records,
                     const std::string& config_json);

struct Checkpoint {
  std::vector<CheckpointRecord> records;
  std::string config_json;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cmit
