#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hcq/nn.hpp"
#include "hcq/optim.hpp"

namespace hcq {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

/// Text header (one line per array: name, shape, byte offset) followed by
/// little-endian float64 payloads. Optimizer moments are stored as arrays
/// named "adam.m/<param>" and "adam.v/<param>".
struct Checkpoint {
  int version = kCheckpointVersion;
  std::size_t iteration = 0;
  nlohmann::json config = nlohmann::json::object();
  std::vector<NamedArray> arrays;
  std::vector<std::pair<std::string, std::int64_t>> optimizer_steps;

  const NamedArray* find(const std::string& name) const;
};

Checkpoint capture_checkpoint(const ParameterStore& store, const AdamW* optimizer, const nlohmann::json& config,
                              std::size_t iteration);

void write_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint read_checkpoint(const std::string& path);

/// Copies values into the store; names and shapes must match exactly.
void restore_parameters(const Checkpoint& checkpoint, ParameterStore& store);
void restore_optimizer(const Checkpoint& checkpoint, const ParameterStore& store, AdamW& optimizer);

}  // namespace hcq
