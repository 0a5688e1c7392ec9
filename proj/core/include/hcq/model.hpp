#pragma once

#include <cstdint>
#include <vector>

#include "hcq/backbone.hpp"
#include "hcq/decoder.hpp"
#include "hcq/heads.hpp"
#include "hcq/losses.hpp"
#include "hcq/scenes.hpp"

namespace hcq {

/// Stub backbone + keypoint-query decoder + mask head.
class HcqModel {
 public:
  HcqModel(const DecoderConfig& config, std::uint64_t seed);
  HcqModel(const HcqModel&) = delete;
  HcqModel& operator=(const HcqModel&) = delete;

  struct Output {
    StubBackbone::Output features;
    std::vector<LayerOutput> layers;
    std::vector<PredictionSet> predictions;  // one per layer, masks on the last
  };

  Output forward(const Tensor& image) const;

  const DecoderConfig& config() const { return decoder_.config(); }
  ParameterStore& parameters() { return store_; }
  const ParameterStore& parameters() const { return store_; }
  const HcqDecoder& decoder() const { return decoder_; }
  HcqDecoder& decoder() { return decoder_; }
  const MaskHead& mask_head() const { return mask_head_; }

 private:
  ParameterStore store_;
  StubBackbone backbone_;
  HcqDecoder decoder_;
  MaskHead mask_head_;
};

Tensor image_tensor(const SceneSample& sample);

/// Masks are max-pooled by mask_factor; canonical joints are taken relative
/// to each instance box. Throws DegenerateBoxError for a degenerate box.
SceneTargets make_targets(const SceneSample& sample, std::size_t mask_factor);

}  // namespace hcq
