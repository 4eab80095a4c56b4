#pragma once

#include <optional>
#include <string>

#include "bayman/config.hpp"
#include "bayman/training.hpp"

namespace bayman {

inline constexpr const char* kCheckpointHeader = "BAYMAN-CKPT-1";

/// On-disk model snapshot: header line, config echo, named parameter
/// tensors as shape lines plus raw row-major 64-bit values (host byte
/// order), and optionally the optimizer state needed to resume training.
struct Checkpoint {
  ExperimentConfig config;
  ModelParams params;
  std::optional<AdamState> adam;
  int next_epoch = 0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace bayman
