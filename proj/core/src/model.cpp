#include "hcq/model.hpp"

#include "hcq/ops.hpp"

namespace hcq {

HcqModel::HcqModel(const DecoderConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  backbone_ = StubBackbone(store_, config.hidden, 3, rng);
  decoder_ = HcqDecoder(store_, config, rng);
  mask_head_ = MaskHead(store_, "mask_head", config.head_width(), config.hidden, rng);
}

HcqModel::Output HcqModel::forward(const Tensor& image) const {
  Output out;
  out.features = backbone_(image);
  out.layers = decoder_.run(out.features.pyramid);
  out.predictions.reserve(out.layers.size());
  for (const auto& l : out.layers) out.predictions.push_back(l.predictions);

  const auto& cfg = decoder_.config();
  const auto& last = out.layers.back();
  const auto& lw = decoder_.layers().back();
  Tensor structural;
  if (cfg.head_condition == HeadCondition::KeypointEmbedding) {
    structural = structural_embedding(last.keypoints, lw.structural, cfg.resolved_sine_dim());
  }
  const Tensor input =
      head_input(lw.norm_head(last.embedding), last.keypoints, cfg.pose_space(), cfg.head_condition, structural);
  auto& final_pred = out.predictions.back();
  final_pred.mask_logits = mask_head_(input, out.features.pixel_embedding);
  final_pred.mask_height = out.features.mask_height;
  final_pred.mask_width = out.features.mask_width;
  return out;
}

Tensor image_tensor(const SceneSample& sample) {
  return Tensor({sample.height, sample.width, 3}, sample.image);
}

SceneTargets make_targets(const SceneSample& sample, std::size_t mask_factor) {
  SceneTargets t;
  t.mask_height = sample.height / mask_factor;
  t.mask_width = sample.width / mask_factor;
  for (const auto& inst : sample.instances) {
    InstanceTarget it;
    it.box = inst.box;
    it.joints = inst.joints;
    it.canonical = image_to_pose(inst.joints, inst.box);
    it.mask = downsample_mask(inst.mask, sample.height, sample.width, mask_factor);
    t.instances.push_back(std::move(it));
  }
  return t;
}

}  // namespace hcq
