#pragma once

#include <cstddef>
#include <string>

#include "hcq/keypoints.hpp"
#include "hcq/nn.hpp"
#include "hcq/tensor.hpp"

namespace hcq {

// Form of the keypoint information concatenated to the decoder embedding.
enum class HeadCondition { CanonicalCoords, ImageCoords, KeypointEmbedding };

HeadCondition parse_head_condition(const std::string& name);
std::string to_string(HeadCondition form);

std::size_t head_input_width(std::size_t dim, std::size_t n_pose, HeadCondition form);

/// Cat(E, K) per query under the configured form. `structural` (P) is only
/// read for KeypointEmbedding.
Tensor head_input(const Tensor& embedding, const LearnableKeypoints& kp, PoseSpace space, HeadCondition form,
                  const Tensor& structural);

struct ClassHead {
  Linear linear;

  ClassHead() = default;
  ClassHead(ParameterStore& store, const std::string& name, std::size_t in, Rng& rng);
  Tensor operator()(const Tensor& input) const;  // [Q,1]
};

struct RegressionOutput {
  Tensor delta;  // refinement deltas
  Tensor scale;  // Laplace scales, softplus-activated, same shape as delta
};

// Logit-space corner deltas plus per-corner scales.
struct BoxHead {
  Mlp mlp;

  BoxHead() = default;
  BoxHead(ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden, Rng& rng);
  RegressionOutput operator()(const Tensor& input) const;  // [Q,4] each
};

// Joint deltas in the stored pose space plus per-coordinate scales.
struct PoseHead {
  Mlp mlp;
  std::size_t n_pose = 0;

  PoseHead() = default;
  PoseHead(ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden, std::size_t n_pose,
           Rng& rng);
  RegressionOutput operator()(const Tensor& input) const;  // [Q,2n] each
};

// Mask embedding from the head input, dotted with every pixel embedding.
struct MaskHead {
  Mlp mlp;

  MaskHead() = default;
  MaskHead(ParameterStore& store, const std::string& name, std::size_t in, std::size_t dim, Rng& rng);
  // pixel_features [H*W, D] -> logits [Q, H*W]
  Tensor operator()(const Tensor& input, const Tensor& pixel_features) const;
};

/// Decoded outputs of one decoder layer.
struct PredictionSet {
  Tensor class_logits;  // [Q,1]
  Tensor corners;       // [Q,4] (x0,y0,x1,y1) of the refined keypoints
  Tensor boxes;         // [Q,4] (cx,cy,w,h)
  Tensor box_scales;    // [Q,4]
  Tensor pose;          // [Q,2n] pose part in its stored space
  Tensor pose_scales;   // [Q,2n]
  Tensor joints;        // [Q,n,2] image space
  Tensor mask_logits;   // [Q, h*w]; final layer only
  std::size_t mask_height = 0;
  std::size_t mask_width = 0;

  std::size_t num_queries() const { return class_logits.size(0); }
  bool has_masks() const { return mask_logits.defined(); }
};

/// Box and joint readout of refined keypoints: boxes = (p_c, d), joints via
/// the pose-space interpretation.
void read_out_keypoints(PredictionSet& pred, const LearnableKeypoints& kp, PoseSpace space);

}  // namespace hcq
