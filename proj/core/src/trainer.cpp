#include "hcq/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include "hcq/dataset_io.hpp"
#include "hcq/ops.hpp"

namespace hcq {

std::string format_step_record(const StepRecord& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "{\"iteration\":%zu,\"total\":%.17g,\"cls\":%.17g,\"mask\":%.17g,\"box\":%.17g,\"pose\":%.17g,"
                "\"grad_norm\":%.17g}",
                r.iteration, r.total, r.cls, r.mask, r.box, r.pose, r.grad_norm);
  return buf;
}

std::vector<SceneSample> training_scenes(const RunConfig& c) {
  if (!c.dataset.path.empty()) return import_dataset(c.dataset.path);
  return generate_scenes(c.dataset.train_seed, c.dataset.train_count, c.dataset.scene);
}

std::vector<SceneSample> evaluation_scenes(const RunConfig& c) {
  return generate_scenes(c.dataset.eval_seed, c.dataset.eval_count, c.dataset.scene);
}

std::vector<Detection> extract_detections(const PredictionSet& p, std::size_t image_index) {
  const std::size_t q_count = p.num_queries();
  const std::size_t n = p.joints.size(1);
  const std::size_t hw = p.has_masks() ? p.mask_logits.size(1) : 0;
  const auto logits = p.class_logits.data();
  const auto corners = p.corners.data();
  const auto joints = p.joints.data();
  std::vector<Detection> out(q_count);
  for (std::size_t q = 0; q < q_count; ++q) {
    auto& d = out[q];
    d.image = image_index;
    d.score = 1.0 / (1.0 + std::exp(-logits[q]));
    d.box = {corners[4 * q], corners[4 * q + 1], corners[4 * q + 2], corners[4 * q + 3]};
    for (std::size_t i = 0; i < n; ++i) d.joints.push_back({joints[(q * n + i) * 2], joints[(q * n + i) * 2 + 1]});
    if (hw) {
      const auto m = p.mask_logits.data().subspan(q * hw, hw);
      d.mask.resize(hw);
      for (std::size_t k = 0; k < hw; ++k) d.mask[k] = m[k] > 0.0 ? 1.0 : 0.0;
    }
  }
  return out;
}

std::vector<GroundTruth> ground_truths(const SceneSample& s, std::size_t image_index, std::size_t mask_factor) {
  std::vector<GroundTruth> out;
  for (const auto& inst : s.instances) {
    out.push_back({image_index, inst.box, downsample_mask(inst.mask, s.height, s.width, mask_factor), inst.joints});
  }
  return out;
}

Evaluation evaluate(const HcqModel& model, const std::vector<SceneSample>& scenes, const RunConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  NoGradGuard guard;
  Evaluation ev;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto out = model.forward(image_tensor(scenes[i]));
    auto dets = extract_detections(out.predictions.back(), i);
    ev.detections.insert(ev.detections.end(), dets.begin(), dets.end());
    auto gts = ground_truths(scenes[i], i, config.dataset.mask_factor);
    ev.truths.insert(ev.truths.end(), gts.begin(), gts.end());
  }
  apply_min_size(ev.detections, ev.truths, config.dataset.scene.image_size, config.min_size);
  ev.metrics = score_detections(ev.detections, ev.truths, scenes.size());
  ev.metrics.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return ev;
}

namespace {

LossReport loss_for(const HcqModel& model, const SceneSample& sample, const RunConfig& config) {
  const auto out = model.forward(image_tensor(sample));
  const auto targets = make_targets(sample, config.dataset.mask_factor);
  Assignment assignment;
  {
    NoGradGuard guard;
    assignment = hungarian_match(matching_cost(out.predictions.back(), targets, config.loss));
  }
  return total_loss(out.predictions, targets, assignment, config.loss, config.regression,
                    config.decoder.pose_space());
}

}  // namespace

LossReport scene_loss(const HcqModel& model, const SceneSample& sample, const RunConfig& config) {
  NoGradGuard guard;
  return loss_for(model, sample, config);
}

Trainer::Trainer(RunConfig config, std::vector<SceneSample> scenes)
    : config_(std::move(config)), scenes_(std::move(scenes)) {
  config_.validate();
  if (scenes_.empty()) throw ConfigError("training set is empty");
  model_ = std::make_unique<HcqModel>(config_.decoder, config_.seed);
  const auto& store = model_->parameters();
  std::vector<bool> decay;
  for (std::size_t i = 0; i < store.size(); ++i) decay.push_back(store.decays(i));
  optimizer_ = std::make_unique<AdamW>(store.tensors(), config_.optim.adamw, decay);
}

SceneSample Trainer::batch_sample(std::size_t slot) const {
  const auto& base = scenes_[slot % scenes_.size()];
  if (!config_.augment.enabled) return base;
  // Keyed on (seed, slot) so a resumed run draws the same augmentations.
  std::seed_seq seq{static_cast<std::uint32_t>(config_.seed), static_cast<std::uint32_t>(config_.seed >> 32),
                    static_cast<std::uint32_t>(slot), static_cast<std::uint32_t>(slot >> 32)};
  Rng rng(seq);
  return augment(base, rng, config_.augment);
}

StepRecord Trainer::step() {
  auto& tape = Tape::active();
  tape.reset();
  const std::size_t batch = config_.optim.batch_size;
  StepRecord rec;
  rec.iteration = iteration_;
  Tensor total;
  for (std::size_t b = 0; b < batch; ++b) {
    const auto sample = batch_sample(iteration_ * batch + b);
    const auto report = loss_for(*model_, sample, config_);
    total = total.defined() ? add(total, report.total) : report.total;
    for (const auto& l : report.layers) {
      rec.cls += l.cls;
      rec.mask += l.mask;
      rec.box += l.box;
      rec.pose += l.pose;
    }
  }
  const double inv = 1.0 / static_cast<double>(batch);
  total = scale(total, inv);
  rec.total = total.item();
  rec.cls *= inv;
  rec.mask *= inv;
  rec.box *= inv;
  rec.pose *= inv;
  backward(total);
  rec.grad_norm = optimizer_->step(config_.optim.clip_norm);
  optimizer_->zero_grad();
  tape.reset();
  ++iteration_;
  return rec;
}

Checkpoint Trainer::checkpoint() const {
  return capture_checkpoint(model_->parameters(), optimizer_.get(), to_json(config_), iteration_);
}

void Trainer::restore(const Checkpoint& c) {
  restore_parameters(c, model_->parameters());
  restore_optimizer(c, model_->parameters(), *optimizer_);
  iteration_ = c.iteration;
}

}  // namespace hcq
