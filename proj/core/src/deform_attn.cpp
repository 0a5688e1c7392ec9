#include "hcq/deform_attn.hpp"

#include <cmath>
#include <numbers>

#include "hcq/ops.hpp"

namespace hcq {

std::size_t FeaturePyramid::channels() const {
  if (levels.empty()) throw ShapeError("feature pyramid is empty");
  return levels.front().size(2);
}

void FeaturePyramid::validate() const {
  const std::size_t d = channels();
  for (std::size_t s = 0; s < levels.size(); ++s) {
    const auto& l = levels[s];
    if (l.dim() != 3 || l.size(2) != d) throw ShapeError("pyramid levels must be [H,W,D] with shared D");
    if (s > 0) {
      const auto& p = levels[s - 1];
      if (l.size(0) <= p.size(0) || l.size(1) <= p.size(1)) {
        throw ShapeError("pyramid resolutions must strictly increase");
      }
    }
  }
}

void SamplingConfig::validate() const {
  if (heads == 0 || points_per_query == 0 || points_per_query % heads != 0) {
    throw ShapeError("sampling points per query must be a positive multiple of the head count");
  }
  for (auto k : keypoint_slots_per_head(*this)) {
    if (k > points_per_head()) throw ShapeError("keypoint quota exceeds the sampling points per head");
  }
}

std::vector<std::size_t> keypoint_slots_per_head(const SamplingConfig& config) {
  std::vector<std::size_t> slots(config.heads, 0);
  for (std::size_t j = 0; j < config.keypoint_quota; ++j) ++slots[j % config.heads];
  return slots;
}

std::vector<std::size_t> generated_slots_per_head(const SamplingConfig& config) {
  auto slots = keypoint_slots_per_head(config);
  for (auto& s : slots) s = config.points_per_head() - s;
  return slots;
}

DeformAttnWeights::DeformAttnWeights(ParameterStore& store, const std::string& name, std::size_t dim,
                                     const SamplingConfig& config, std::size_t num_levels, Rng& rng) {
  config.validate();
  if (dim % config.heads != 0) throw ShapeError("hidden dim must be divisible by the head count");
  const auto gen = generated_slots_per_head(config);
  std::size_t total_gen = 0;
  for (auto g : gen) total_gen += g;
  if (total_gen > 0) {
    // Offsets start at zero weight with a ring pattern in the bias so that
    // generated samples fan out around the box center. Built without drawing
    // from rng so the quota does not shift later initializations.
    offsets.weight = store.add(name + ".offsets.weight", Tensor::zeros({dim, 2 * total_gen}));
    offsets.bias = store.add(name + ".offsets.bias", Tensor::zeros({2 * total_gen}), false);
    auto b = offsets.bias.mutable_data();
    std::size_t k = 0;
    for (std::size_t m = 0; m < config.heads; ++m) {
      for (std::size_t g = 0; g < gen[m]; ++g, ++k) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(total_gen);
        const double radius = 0.25 * static_cast<double>(1 + g % 2);
        b[2 * k] = radius * std::cos(angle);
        b[2 * k + 1] = radius * std::sin(angle);
      }
    }
  }
  attention = Linear(store, name + ".attention", dim, config.heads * num_levels * config.points_per_head(), rng);
  for (auto& w : attention.weight.mutable_data()) w = 0.0;
  value = Linear(store, name + ".value", dim, dim, rng);
  output = Linear(store, name + ".output", dim, dim, rng);
}

std::vector<Tensor> generate_offsets(const Tensor& query, const BoxParts& box, const Linear& offset_layer,
                                     std::span<const std::size_t> generated_per_head) {
  const std::size_t q = query.size(0);
  std::size_t total = 0;
  for (auto g : generated_per_head) total += g;
  std::vector<Tensor> out(generated_per_head.size());
  if (total == 0) return out;
  if (offset_layer.out_features() != 2 * total) throw ShapeError("offset layer width does not match plan");
  const Tensor raw = offset_layer(query);
  const Tensor center = reshape(box.centers, {q, 1, 2});
  const Tensor extent = reshape(box.extents, {q, 1, 2});
  std::size_t col = 0;
  for (std::size_t m = 0; m < generated_per_head.size(); ++m) {
    const std::size_t g = generated_per_head[m];
    if (g == 0) continue;
    const Tensor delta = reshape(slice(raw, 1, col, col + 2 * g), {q, g, 2});
    out[m] = add(center, mul(delta, extent));
    col += 2 * g;
  }
  return out;
}

SamplingPlan build_sampling_plan(const LearnableKeypoints& kp, PoseSpace space, const Tensor& query,
                                 const Linear& offset_layer, const SamplingConfig& config) {
  config.validate();
  const std::size_t q = kp.num_queries();
  const std::size_t np = config.points_per_head();
  const auto kslots = keypoint_slots_per_head(config);
  const auto gslots = generated_slots_per_head(config);
  const BoxParts box = bbox_center_extent(kp);

  SamplingPlan plan;
  plan.num_queries = q;
  plan.points_per_head = np;
  plan.locations.resize(config.heads);
  plan.from_keypoints.resize(config.heads);
  plan.pool_entries.resize(config.heads);

  Tensor pool;
  const std::size_t pool_size = kp.n_pose + 2;
  if (config.keypoint_quota > 0) {
    pool = concat({image_joints(kp, space), reshape(kp.corner0(), {q, 1, 2}), reshape(kp.corner1(), {q, 1, 2})}, 1);
  }
  const auto generated = generate_offsets(query, box, offset_layer, gslots);

  for (std::size_t m = 0; m < config.heads; ++m) {
    std::vector<Tensor> parts;
    auto& entries = plan.pool_entries[m];
    for (std::size_t t = 0; t < kslots[m]; ++t) entries.push_back((m + t * config.heads) % pool_size);
    if (!entries.empty()) parts.push_back(index_select(pool, 1, entries));
    if (gslots[m] > 0) parts.push_back(generated[m]);
    const Tensor locs = parts.size() == 1 ? parts.front() : concat(parts, 1);
    plan.locations[m] = reshape(locs, {q * np, 2});
    plan.from_keypoints[m].assign(np, false);
    for (std::size_t t = 0; t < kslots[m]; ++t) plan.from_keypoints[m][t] = true;
  }
  return plan;
}

Tensor attend(std::span<const Tensor> value_levels, const SamplingPlan& plan, std::span<const Tensor> attention) {
  const std::size_t heads = plan.heads();
  if (attention.size() != heads) throw ShapeError("attend: one attention tensor per head required");
  if (value_levels.empty()) throw ShapeError("attend: no value levels");
  const std::size_t dim = value_levels.front().size(2);
  if (dim % heads != 0) throw ShapeError("attend: D must be divisible by the head count");
  const std::size_t dh = dim / heads;
  const std::size_t q = plan.num_queries, np = plan.points_per_head, ns = value_levels.size();
  std::vector<Tensor> head_out;
  head_out.reserve(heads);
  for (std::size_t m = 0; m < heads; ++m) {
    if (attention[m].shape() != Shape{q, ns * np}) throw ShapeError("attend: attention shape mismatch");
    std::vector<Tensor> per_level;
    per_level.reserve(ns);
    for (const auto& lvl : value_levels) {
      const Tensor vh = heads == 1 ? lvl : slice(lvl, 2, m * dh, (m + 1) * dh);
      per_level.push_back(reshape(bilinear_sample(vh, plan.locations[m]), {q, np * dh}));
    }
    const Tensor stacked = per_level.size() == 1 ? per_level.front() : concat(per_level, 1);
    const Tensor v = reshape(stacked, {q, ns * np, dh});
    head_out.push_back(reshape(bmm(reshape(attention[m], {q, 1, ns * np}), v), {q, dh}));
  }
  return heads == 1 ? head_out.front() : concat(head_out, 1);
}

DeformAttnResult deform_attn_keypoints(const Tensor& query, const FeaturePyramid& pyramid, const SamplingPlan& plan,
                                       const DeformAttnWeights& weights) {
  const std::size_t dim = query.size(1);
  const std::size_t heads = plan.heads();
  if (heads == 0 || dim % heads != 0) throw ShapeError("deform_attn_keypoints: D % N_h != 0");
  if (pyramid.channels() != dim) throw ShapeError("deform_attn_keypoints: pyramid channels differ from D");
  const std::size_t ns = pyramid.num_levels();
  const std::size_t np = plan.points_per_head;

  std::vector<Tensor> values;
  values.reserve(ns);
  for (const auto& lvl : pyramid.levels) {
    const std::size_t h = lvl.size(0), w = lvl.size(1);
    values.push_back(reshape(weights.value(reshape(lvl, {h * w, dim})), {h, w, dim}));
  }
  const Tensor logits = weights.attention(query);
  DeformAttnResult result;
  for (std::size_t m = 0; m < heads; ++m) {
    result.attention.push_back(softmax(slice(logits, 1, m * ns * np, (m + 1) * ns * np), 1));
  }
  result.output = weights.output(attend(values, plan, result.attention));
  return result;
}

}  // namespace hcq
