#pragma once

#include <cstddef>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "hcq/checkpoint.hpp"
#include "hcq/config.hpp"
#include "hcq/metrics.hpp"
#include "hcq/model.hpp"
#include "hcq/optim.hpp"

namespace hcq {

/// Component sums over layers (unweighted) of the batch-mean loss.
struct StepRecord {
  std::size_t iteration = 0;
  double total = 0.0;
  double cls = 0.0;
  double mask = 0.0;
  double box = 0.0;
  double pose = 0.0;
  double grad_norm = 0.0;
};

/// One JSON object per line, doubles printed with %.17g.
std::string format_step_record(const StepRecord& record);

std::vector<SceneSample> training_scenes(const RunConfig& config);
std::vector<SceneSample> evaluation_scenes(const RunConfig& config);

/// Every query becomes a detection scored by sigmoid(class logit), with
/// masks binarized at 0.5 on the mask grid.
std::vector<Detection> extract_detections(const PredictionSet& final_layer, std::size_t image_index);
std::vector<GroundTruth> ground_truths(const SceneSample& sample, std::size_t image_index, std::size_t mask_factor);

struct Evaluation {
  MetricsReport metrics;
  std::vector<Detection> detections;
  std::vector<GroundTruth> truths;
};

Evaluation evaluate(const HcqModel& model, const std::vector<SceneSample>& scenes, const RunConfig& config);

class Trainer {
 public:
  Trainer(RunConfig config, std::vector<SceneSample> scenes);

  // Forward + loss for the next batch, backward, one optimizer update.
  StepRecord step();

  std::size_t iteration() const { return iteration_; }
  const RunConfig& config() const { return config_; }
  HcqModel& model() { return *model_; }
  const HcqModel& model() const { return *model_; }
  AdamW& optimizer() { return *optimizer_; }

  Checkpoint checkpoint() const;
  // Parameters, optimizer state and iteration counter.
  void restore(const Checkpoint& checkpoint);

 private:
  SceneSample batch_sample(std::size_t slot) const;

  RunConfig config_;
  std::vector<SceneSample> scenes_;
  std::unique_ptr<HcqModel> model_;
  std::unique_ptr<AdamW> optimizer_;
  std::size_t iteration_ = 0;
};

/// Mean loss of one scene under the current parameters, no gradient.
LossReport scene_loss(const HcqModel& model, const SceneSample& sample, const RunConfig& config);

}  // namespace hcq
