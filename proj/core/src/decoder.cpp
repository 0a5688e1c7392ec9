#include "hcq/decoder.hpp"

#include <cmath>
#include <stdexcept>

#include "hcq/ops.hpp"

namespace hcq {

DecoderConfig DecoderConfig::full_scale() {
  DecoderConfig c;
  c.num_queries = 100;
  c.num_layers = 8;
  c.hidden = 256;
  c.heads = 8;
  c.points_per_query = 32;
  c.keypoint_quota = 16;
  c.n_pose = 17;
  c.ffn_dim = 2048;
  return c;
}

void DecoderConfig::validate() const {
  if (num_queries == 0) throw std::invalid_argument("decoder: num_queries must be positive");
  if (num_layers == 0) throw std::invalid_argument("decoder: num_layers must be >= 1");
  if (heads == 0 || hidden % heads != 0) throw std::invalid_argument("decoder: hidden must be divisible by heads");
  if (n_pose == 0) throw std::invalid_argument("decoder: n_pose must be positive");
  if (resolved_sine_dim() == 0 || resolved_sine_dim() % 2 != 0) {
    throw std::invalid_argument("decoder: sine_dim must be even and positive");
  }
  if (ffn_dim == 0) throw std::invalid_argument("decoder: ffn_dim must be positive");
  sampling().validate();
}

Tensor multi_head_self_attention(const Tensor& qk, const Tensor& v, const Linear& wq, const Linear& wk,
                                 const Linear& wv, const Linear& wo, std::size_t heads) {
  const std::size_t dim = qk.size(1);
  const std::size_t dh = dim / heads;
  const Tensor q = wq(qk);
  const Tensor k = wk(qk);
  const Tensor val = wv(v);
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (std::size_t m = 0; m < heads; ++m) {
    const Tensor qm = slice(q, 1, m * dh, (m + 1) * dh);
    const Tensor km = slice(k, 1, m * dh, (m + 1) * dh);
    const Tensor vm = slice(val, 1, m * dh, (m + 1) * dh);
    const Tensor a = softmax(scale(matmul(qm, transpose(km)), inv), 1);
    outs.push_back(matmul(a, vm));
  }
  return wo(heads == 1 ? outs.front() : concat(outs, 1));
}

HcqDecoder::HcqDecoder(ParameterStore& store, const DecoderConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  const std::size_t d = config_.hidden;
  const std::size_t kw = 2 * (config_.n_pose + 2);
  const std::size_t hw = config_.head_width();
  initial_embedding_ = store.add("decoder.query.embedding", normal_tensor({config_.num_queries, d}, 1.0, rng), false);
  initial_keypoints_ = store.add(
      "decoder.query.keypoints",
      initial_keypoint_coords(config_.num_queries, config_.n_pose, config_.pose_space(), rng), false);
  for (std::size_t l = 0; l < config_.num_layers; ++l) {
    const std::string p = "decoder.layer" + std::to_string(l);
    DecoderLayerWeights w;
    w.structural = Mlp(store, p + ".structural", kw * config_.resolved_sine_dim(), d, d, 3, rng);
    w.norm_self = LayerNorm(store, p + ".norm_self", d);
    w.self_q = Linear(store, p + ".self.q", d, d, rng);
    w.self_k = Linear(store, p + ".self.k", d, d, rng);
    w.self_v = Linear(store, p + ".self.v", d, d, rng);
    w.self_out = Linear(store, p + ".self.out", d, d, rng);
    w.norm_cross = LayerNorm(store, p + ".norm_cross", d);
    w.cross = DeformAttnWeights(store, p + ".cross", d, config_.sampling(), config_.num_levels, rng);
    w.norm_ffn = LayerNorm(store, p + ".norm_ffn", d);
    w.ffn_in = Linear(store, p + ".ffn.in", d, config_.ffn_dim, rng);
    w.ffn_out = Linear(store, p + ".ffn.out", config_.ffn_dim, d, rng);
    w.norm_head = LayerNorm(store, p + ".norm_head", d);
    w.box = BoxHead(store, p + ".box", hw, d, rng);
    w.pose = PoseHead(store, p + ".pose", hw, d, config_.n_pose, rng);
    // Refinement starts as the identity.
    w.box.mlp.layers.back().zero();
    w.pose.mlp.layers.back().zero();
    layers_.push_back(std::move(w));
  }
  class_head_ = ClassHead(store, "decoder.class", hw, rng);
}

LayerOutput HcqDecoder::decoder_layer(std::size_t layer, const Tensor& embedding, const LearnableKeypoints& keypoints,
                                      const FeaturePyramid& pyramid) const {
  const auto& w = layers_.at(layer);
  const PoseSpace space = config_.pose_space();
  LayerOutput out;
  out.structural = structural_embedding(keypoints, w.structural, config_.resolved_sine_dim());

  const Tensor h = w.norm_self(embedding);
  const Tensor qk = add(h, out.structural);
  Tensor e = add(embedding, multi_head_self_attention(qk, h, w.self_q, w.self_k, w.self_v, w.self_out, config_.heads));

  const Tensor query = add(out.structural, w.norm_cross(e));
  out.plan = build_sampling_plan(keypoints, space, query, w.cross.offsets, config_.sampling());
  e = add(e, deform_attn_keypoints(query, pyramid, out.plan, w.cross).output);

  e = add(e, w.ffn_out(relu(w.ffn_in(w.norm_ffn(e)))));
  out.embedding = e;

  const Tensor input = head_input(w.norm_head(e), keypoints, space, config_.head_condition, out.structural);
  const RegressionOutput box = w.box(input);
  const RegressionOutput pose = w.pose(input);
  out.keypoints = refine(keypoints, box.delta, pose.delta);

  auto& pred = out.predictions;
  pred.class_logits = class_head_(input);
  pred.box_scales = box.scale;
  pred.pose_scales = pose.scale;
  read_out_keypoints(pred, out.keypoints, space);
  return out;
}

std::vector<LayerOutput> HcqDecoder::run(const FeaturePyramid& pyramid) const {
  return run(pyramid, initial_embedding_, initial_keypoints_);
}

std::vector<LayerOutput> HcqDecoder::run(const FeaturePyramid& pyramid, const Tensor& embedding0,
                                         const Tensor& keypoints0) const {
  pyramid.validate();
  if (pyramid.num_levels() != config_.num_levels) throw ShapeError("decoder: pyramid level count mismatch");
  if (pyramid.channels() != config_.hidden) throw ShapeError("decoder: pyramid channel dim differs from hidden");
  if (embedding0.shape() != Shape{keypoints0.size(0), config_.hidden}) {
    throw ShapeError("decoder: initial embedding shape mismatch");
  }
  std::vector<LayerOutput> outputs;
  outputs.reserve(config_.num_layers);
  Tensor e = embedding0;
  LearnableKeypoints k = sanitize(make_keypoints(keypoints0, config_.n_pose));
  for (std::size_t l = 0; l < config_.num_layers; ++l) {
    outputs.push_back(decoder_layer(l, e, k, pyramid));
    e = outputs.back().embedding;
    k = outputs.back().keypoints;
  }
  return outputs;
}

}  // namespace hcq
