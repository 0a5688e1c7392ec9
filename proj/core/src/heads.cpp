#include "hcq/heads.hpp"

#include <stdexcept>

#include "hcq/ops.hpp"

namespace hcq {

HeadCondition parse_head_condition(const std::string& name) {
  if (name == "canonical-coords") return HeadCondition::CanonicalCoords;
  if (name == "image-coords") return HeadCondition::ImageCoords;
  if (name == "keypoint-embedding") return HeadCondition::KeypointEmbedding;
  throw std::invalid_argument("unknown head condition form: " + name);
}

std::string to_string(HeadCondition form) {
  switch (form) {
    case HeadCondition::CanonicalCoords: return "canonical-coords";
    case HeadCondition::ImageCoords: return "image-coords";
    case HeadCondition::KeypointEmbedding: return "keypoint-embedding";
  }
  return "unknown";
}

std::size_t head_input_width(std::size_t dim, std::size_t n_pose, HeadCondition form) {
  return form == HeadCondition::KeypointEmbedding ? 2 * dim : dim + 2 * (n_pose + 2);
}

Tensor head_input(const Tensor& embedding, const LearnableKeypoints& kp, PoseSpace space, HeadCondition form,
                  const Tensor& structural) {
  switch (form) {
    case HeadCondition::CanonicalCoords:
      return concat({embedding, kp.coords}, 1);
    case HeadCondition::ImageCoords: {
      const Tensor joints = reshape(image_joints(kp, space), {kp.num_queries(), 2 * kp.n_pose});
      return concat({embedding, kp.bbox(), joints}, 1);
    }
    case HeadCondition::KeypointEmbedding:
      if (!structural.defined()) throw std::invalid_argument("keypoint-embedding form needs the structural embedding");
      return concat({embedding, structural}, 1);
  }
  throw std::invalid_argument("unknown head condition form");
}

ClassHead::ClassHead(ParameterStore& store, const std::string& name, std::size_t in, Rng& rng)
    : linear(store, name, in, 1, rng) {}

Tensor ClassHead::operator()(const Tensor& input) const { return linear(input); }

BoxHead::BoxHead(ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden, Rng& rng)
    : mlp(store, name, in, hidden, 8, 3, rng) {}

RegressionOutput BoxHead::operator()(const Tensor& input) const {
  const Tensor out = mlp(input);
  return {slice(out, 1, 0, 4), softplus(slice(out, 1, 4, 8))};
}

PoseHead::PoseHead(ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden,
                   std::size_t n_pose_, Rng& rng)
    : mlp(store, name, in, hidden, 4 * n_pose_, 3, rng), n_pose(n_pose_) {}

RegressionOutput PoseHead::operator()(const Tensor& input) const {
  const Tensor out = mlp(input);
  return {slice(out, 1, 0, 2 * n_pose), softplus(slice(out, 1, 2 * n_pose, 4 * n_pose))};
}

MaskHead::MaskHead(ParameterStore& store, const std::string& name, std::size_t in, std::size_t dim, Rng& rng)
    : mlp(store, name, in, dim, dim, 3, rng) {}

Tensor MaskHead::operator()(const Tensor& input, const Tensor& pixel_features) const {
  const Tensor emb = mlp(input);
  if (pixel_features.dim() != 2 || pixel_features.size(1) != emb.size(1)) {
    throw ShapeError("mask head: pixel feature channels " + shape_str(pixel_features.shape()) +
                     " do not match embedding width " + std::to_string(emb.size(1)));
  }
  return matmul(emb, transpose(pixel_features));
}

void read_out_keypoints(PredictionSet& pred, const LearnableKeypoints& kp, PoseSpace space) {
  const BoxParts parts = bbox_center_extent(kp);
  pred.corners = kp.bbox();
  pred.boxes = concat({parts.centers, parts.extents}, 1);
  pred.pose = kp.pose();
  pred.joints = image_joints(kp, space);
}

}  // namespace hcq
