#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hcq/decoder.hpp"
#include "hcq/losses.hpp"
#include "hcq/optim.hpp"
#include "hcq/scenes.hpp"

namespace hcq {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OptimConfig {
  AdamWOptions adamw{1e-3, 1e-4, 0.9, 0.999, 1e-8};
  double clip_norm = 0.1;
  std::size_t batch_size = 4;
};

struct DatasetConfig {
  SceneConfig scene;
  std::uint64_t train_seed = 1000;
  std::size_t train_count = 16;
  std::uint64_t eval_seed = 900000;
  std::size_t eval_count = 64;
  std::size_t mask_factor = 8;
  // Directory written by generate-data; empty means generate in memory.
  std::string path;
};

struct RunConfig {
  std::uint64_t seed = 0;
  DecoderConfig decoder;
  LossWeights loss;
  RegressionLoss regression = RegressionLoss::LaplaceNll;
  AugmentConfig augment;
  DatasetConfig dataset;
  OptimConfig optim;
  std::size_t iterations = 2000;
  std::size_t checkpoint_every = 500;
  // Boxes smaller than min_size x min_size pixels are skipped by eval.
  std::size_t min_size = 0;
  double score_threshold = 0.3;
  std::string output_dir = "runs/default";

  void validate() const;
};

nlohmann::json to_json(const RunConfig& config);

/// Strict: every key must exist in the schema with a matching type; missing
/// keys keep their defaults.
RunConfig run_config_from_json(const nlohmann::json& j);

/// "a.b.c=value"; value parses as JSON, otherwise it is taken as a string.
void apply_override(nlohmann::json& j, const std::string& assignment);

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides = {});

std::string dump_json(const nlohmann::json& j);

}  // namespace hcq
