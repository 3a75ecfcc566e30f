#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "lfr/model/params.hpp"

namespace lfr {

/// On-disk training state: format version, model configuration, parameter
/// tensors, optional optimizer moments, and the step counter. Tensor data
/// is little-endian float32 with a trailing CRC32, so a round trip is
/// bitwise exact for float32-representable values.
struct Checkpoint {
  ModelConfig config;
  SamplerConfig sampler;
  ModelParams params;
  std::map<std::string, Eigen::MatrixXd> opt_tensors;  // moments, may be empty
  int64_t step = 0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);

/// Throws IoError, VersionMismatch, CorruptArchive. When `expected` is
/// given, tensor names and shapes are validated against a fresh
/// initialization of that configuration (ShapeMismatch names the tensor).
Checkpoint load_checkpoint(const std::string& path,
                           const ModelConfig* expected = nullptr);

// JSON bridges for configurations (used by the checkpoint header, the CLI
// config files, and the schema examples).
std::string model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const std::string& text);
std::string sampler_config_to_json(const SamplerConfig& config);
SamplerConfig sampler_config_from_json(const std::string& text);

}  // namespace lfr
