#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hcq/keypoints.hpp"
#include "hcq/nn.hpp"
#include "hcq/tensor.hpp"

namespace hcq {

/// Multi-resolution feature maps, each [H_s, W_s, D], coarsest first.
struct FeaturePyramid {
  std::vector<Tensor> levels;

  std::size_t num_levels() const { return levels.size(); }
  std::size_t channels() const;
  // Throws ShapeError unless channels agree and resolutions strictly increase.
  void validate() const;
};

struct SamplingConfig {
  std::size_t heads = 4;
  std::size_t points_per_query = 32;
  std::size_t keypoint_quota = 16;

  std::size_t points_per_head() const { return points_per_query / heads; }
  void validate() const;
};

// Number of keypoint-derived slots each head receives from round-robin
// distribution of the quota.
std::vector<std::size_t> keypoint_slots_per_head(const SamplingConfig& config);
std::vector<std::size_t> generated_slots_per_head(const SamplingConfig& config);

/// Per-head sampling locations S_m = J_m followed by D_m.
struct SamplingPlan {
  std::size_t num_queries = 0;
  std::size_t points_per_head = 0;
  std::vector<Tensor> locations;                  // per head [Q * N_p, 2], rows (query, point)
  std::vector<std::vector<bool>> from_keypoints;  // per head [N_p]
  std::vector<std::vector<std::size_t>> pool_entries;  // per head, keypoint pool index per keypoint slot

  std::size_t heads() const { return locations.size(); }
};

struct DeformAttnWeights {
  Linear offsets;    // D -> 2 * total generated points
  Linear attention;  // D -> heads * levels * N_p
  Linear value;      // D -> D, head m owns columns [m*D/N_h, (m+1)*D/N_h)
  Linear output;     // D -> D

  DeformAttnWeights() = default;
  DeformAttnWeights(ParameterStore& store, const std::string& name, std::size_t dim, const SamplingConfig& config,
                    std::size_t num_levels, Rng& rng);
};

/// Generated locations p_c + offset * diag(d) per head, each [Q, G_m, 2].
std::vector<Tensor> generate_offsets(const Tensor& query, const BoxParts& box, const Linear& offset_layer,
                                     std::span<const std::size_t> generated_per_head);

/// The keypoint pool is the image-space joints followed by p0 and p1. Slot t
/// of head m takes pool entry (m + t * N_h) mod pool size.
SamplingPlan build_sampling_plan(const LearnableKeypoints& kp, PoseSpace space, const Tensor& query,
                                 const Linear& offset_layer, const SamplingConfig& config);

/// Per-head softmax-weighted sums of bilinear samples, concatenated over
/// heads: [Q, D]. value_levels are already projected ([H_s, W_s, D]);
/// attention[m] is [Q, N_s * N_p] with columns ordered (level, point).
Tensor attend(std::span<const Tensor> value_levels, const SamplingPlan& plan, std::span<const Tensor> attention);

struct DeformAttnResult {
  Tensor output;                   // [Q, D]
  std::vector<Tensor> attention;   // per head [Q, N_s * N_p]
};

DeformAttnResult deform_attn_keypoints(const Tensor& query, const FeaturePyramid& pyramid, const SamplingPlan& plan,
                                       const DeformAttnWeights& weights);

}  // namespace hcq
