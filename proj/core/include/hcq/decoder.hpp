#pragma once

#include <cstddef>
#include <vector>

#include "hcq/deform_attn.hpp"
#include "hcq/heads.hpp"
#include "hcq/keypoints.hpp"
#include "hcq/nn.hpp"

namespace hcq {

struct DecoderConfig {
  std::size_t num_queries = 20;
  std::size_t num_layers = 4;
  std::size_t hidden = 64;
  std::size_t heads = 4;
  std::size_t points_per_query = 32;
  std::size_t keypoint_quota = 16;
  std::size_t n_pose = 5;
  bool canonical_space = true;
  std::size_t ffn_dim = 128;
  std::size_t num_levels = 3;
  // 0 selects hidden / 8.
  std::size_t sine_dim = 0;
  HeadCondition head_condition = HeadCondition::CanonicalCoords;

  // Q=100, L=8, D=256, 8 heads, 17 joints.
  static DecoderConfig full_scale();

  std::size_t resolved_sine_dim() const { return sine_dim ? sine_dim : hidden / 8; }
  PoseSpace pose_space() const { return canonical_space ? PoseSpace::Canonical : PoseSpace::Image; }
  SamplingConfig sampling() const { return {heads, points_per_query, keypoint_quota}; }
  std::size_t head_width() const { return head_input_width(hidden, n_pose, head_condition); }
  void validate() const;
};

struct DecoderLayerWeights {
  Mlp structural;
  LayerNorm norm_self;
  Linear self_q, self_k, self_v, self_out;
  LayerNorm norm_cross;
  DeformAttnWeights cross;
  LayerNorm norm_ffn;
  Linear ffn_in, ffn_out;
  LayerNorm norm_head;
  BoxHead box;
  PoseHead pose;
};

struct LayerOutput {
  Tensor embedding;              // E^l [Q,D]
  LearnableKeypoints keypoints;  // K^l
  Tensor structural;             // P computed from K^{l-1}
  SamplingPlan plan;
  PredictionSet predictions;
};

/// Multi-head attention over queries: keys/queries carry qk, values v.
Tensor multi_head_self_attention(const Tensor& qk, const Tensor& v, const Linear& wq, const Linear& wk,
                                 const Linear& wv, const Linear& wo, std::size_t heads);

class HcqDecoder {
 public:
  HcqDecoder() = default;
  HcqDecoder(ParameterStore& store, const DecoderConfig& config, Rng& rng);

  const DecoderConfig& config() const { return config_; }
  const std::vector<DecoderLayerWeights>& layers() const { return layers_; }
  std::vector<DecoderLayerWeights>& layers() { return layers_; }
  const ClassHead& class_head() const { return class_head_; }
  ClassHead& class_head() { return class_head_; }
  const Tensor& initial_embedding() const { return initial_embedding_; }
  const Tensor& initial_keypoints() const { return initial_keypoints_; }

  LayerOutput decoder_layer(std::size_t layer, const Tensor& embedding, const LearnableKeypoints& keypoints,
                            const FeaturePyramid& pyramid) const;

  std::vector<LayerOutput> run(const FeaturePyramid& pyramid) const;
  std::vector<LayerOutput> run(const FeaturePyramid& pyramid, const Tensor& embedding0,
                               const Tensor& keypoints0) const;

 private:
  DecoderConfig config_;
  std::vector<DecoderLayerWeights> layers_;
  ClassHead class_head_;
  Tensor initial_embedding_;
  Tensor initial_keypoints_;
};

}  // namespace hcq
