#include "hcq/keypoints.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hcq/ops.hpp"

namespace hcq {

Tensor LearnableKeypoints::corner0() const { return slice(coords, 1, 0, 2); }
Tensor LearnableKeypoints::corner1() const { return slice(coords, 1, 2, 4); }
Tensor LearnableKeypoints::bbox() const { return slice(coords, 1, 0, 4); }
Tensor LearnableKeypoints::pose() const { return slice(coords, 1, 4, width()); }

LearnableKeypoints make_keypoints(Tensor coords, std::size_t n_pose) {
  if (coords.dim() != 2 || coords.size(1) != 2 * (n_pose + 2)) {
    throw ShapeError("keypoints must be [Q, " + std::to_string(2 * (n_pose + 2)) + "], got " +
                     shape_str(coords.shape()));
  }
  if (n_pose == 0) throw ShapeError("keypoints need at least one pose joint");
  return {std::move(coords), n_pose};
}

BoxParts bbox_center_extent(const LearnableKeypoints& kp) {
  const Tensor p0 = kp.corner0();
  const Tensor p1 = kp.corner1();
  return {scale(add(p0, p1), 0.5), sub(p1, p0)};
}

Tensor pose_to_image(const LearnableKeypoints& kp) {
  const std::size_t q = kp.num_queries();
  const Tensor p0 = reshape(kp.corner0(), {q, 1, 2});
  const Tensor d = reshape(bbox_center_extent(kp).extents, {q, 1, 2});
  const Tensor pose = reshape(kp.pose(), {q, kp.n_pose, 2});
  return add(p0, mul(pose, d));
}

Tensor image_joints(const LearnableKeypoints& kp, PoseSpace space) {
  if (space == PoseSpace::Canonical) return pose_to_image(kp);
  return reshape(kp.pose(), {kp.num_queries(), kp.n_pose, 2});
}

Point2 pose_to_image(const Point2& c, const Box& box) {
  return {box.x0 + c.x * box.width(), box.y0 + c.y * box.height()};
}

std::vector<Point2> pose_to_image(std::span<const Point2> canonical, const Box& box) {
  std::vector<Point2> out;
  out.reserve(canonical.size());
  for (const auto& c : canonical) out.push_back(pose_to_image(c, box));
  return out;
}

std::vector<Point2> image_to_pose(std::span<const Point2> joints, const Box& box) {
  const double w = box.width(), h = box.height();
  if (w < kMinBoxExtent || h < kMinBoxExtent) {
    throw DegenerateBoxError("image_to_pose: box extent below " + std::to_string(kMinBoxExtent));
  }
  std::vector<Point2> out;
  out.reserve(joints.size());
  for (const auto& j : joints) out.push_back({(j.x - box.x0) / w, (j.y - box.y0) / h});
  return out;
}

std::vector<double> sine_encode(double k, std::size_t dim, double temperature) {
  if (dim == 0 || dim % 2 != 0) throw ShapeError("sine_encode: dimension must be even and positive");
  std::vector<double> out(dim);
  for (std::size_t j = 0; j < dim / 2; ++j) {
    const double f = 2.0 * std::numbers::pi /
                     std::pow(temperature, 2.0 * static_cast<double>(j) / static_cast<double>(dim));
    out[2 * j] = std::sin(k * f);
    out[2 * j + 1] = std::cos(k * f);
  }
  return out;
}

Tensor structural_embedding(const LearnableKeypoints& kp, const Mlp& mlp, std::size_t sine_dim) {
  if (mlp.layers.size() != 3) throw ShapeError("structural embedding MLP must have three layers");
  if (mlp.layers.front().in_features() != kp.width() * sine_dim) {
    throw ShapeError("structural embedding: W1 expects " + std::to_string(mlp.layers.front().in_features()) +
                     " inputs, keypoints give " + std::to_string(kp.width() * sine_dim));
  }
  return mlp(sine_encode(kp.coords, sine_dim));
}

LearnableKeypoints sanitize(const LearnableKeypoints& kp) {
  const Tensor c = clamp(kp.coords, kCoordLo, kCoordHi);
  const Tensor p0 = slice(c, 1, 0, 2);
  const Tensor p1 = slice(c, 1, 2, 4);
  const Tensor pose = slice(c, 1, 4, kp.width());
  return {concat({minimum(p0, p1), maximum(p0, p1), pose}, 1), kp.n_pose};
}

LearnableKeypoints refine(const LearnableKeypoints& kp, const Tensor& box_delta, const Tensor& pose_delta) {
  const Tensor bbox = sigmoid(add(inverse_sigmoid(kp.bbox()), box_delta));
  const Tensor pose = add(kp.pose(), pose_delta);
  return sanitize({concat({bbox, pose}, 1), kp.n_pose});
}

Tensor initial_keypoint_coords(std::size_t num_queries, std::size_t n_pose, PoseSpace space, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t width = 2 * (n_pose + 2);
  std::vector<double> v(num_queries * width);
  for (std::size_t q = 0; q < num_queries; ++q) {
    double* row = v.data() + q * width;
    for (int k = 0; k < 4; ++k) row[k] = unit(rng);
    if (row[0] > row[2]) std::swap(row[0], row[2]);
    if (row[1] > row[3]) std::swap(row[1], row[3]);
    for (std::size_t j = 0; j < n_pose; ++j) {
      row[4 + 2 * j] = space == PoseSpace::Canonical ? 0.5 : 0.5 * (row[0] + row[2]);
      row[5 + 2 * j] = space == PoseSpace::Canonical ? 0.5 : 0.5 * (row[1] + row[3]);
    }
  }
  return Tensor({num_queries, width}, std::move(v));
}

}  // namespace hcq
