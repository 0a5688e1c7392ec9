#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "hcq/nn.hpp"
#include "hcq/tensor.hpp"

namespace hcq {

// How the pose part of the learnable keypoints is interpreted.
enum class PoseSpace { Canonical, Image };

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

// Corner-form box in normalized image units.
struct Box {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
};

class DegenerateBoxError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kMinBoxExtent = 1e-6;
inline constexpr double kCoordLo = -0.5;
inline constexpr double kCoordHi = 1.5;

/// Learnable keypoints K for Q queries, stored flat as [Q, 2 * (n_pose + 2)]:
/// columns 0..3 are the bbox corners (x0, y0, x1, y1), then one (x, y) pair
/// per pose joint.
struct LearnableKeypoints {
  Tensor coords;
  std::size_t n_pose = 0;

  std::size_t num_queries() const { return coords.size(0); }
  std::size_t width() const { return 2 * (n_pose + 2); }
  Tensor corner0() const;  // [Q,2]
  Tensor corner1() const;  // [Q,2]
  Tensor bbox() const;     // [Q,4]
  Tensor pose() const;     // [Q,2n]
};

LearnableKeypoints make_keypoints(Tensor coords, std::size_t n_pose);

struct BoxParts {
  Tensor centers;  // [Q,2]
  Tensor extents;  // [Q,2]
};

/// p_c = (p0 + p1) / 2, d = p1 - p0.
BoxParts bbox_center_extent(const LearnableKeypoints& kp);

/// Image-space joints p0 + p_i * diag(d), shape [Q, n_pose, 2].
Tensor pose_to_image(const LearnableKeypoints& kp);

/// Image-space joints under either interpretation of the pose part.
Tensor image_joints(const LearnableKeypoints& kp, PoseSpace space);

// Plain-value forms used for ground truth encoding and evaluation.
Point2 pose_to_image(const Point2& canonical, const Box& box);
std::vector<Point2> pose_to_image(std::span<const Point2> canonical, const Box& box);
// Throws DegenerateBoxError when an extent is below kMinBoxExtent.
std::vector<Point2> image_to_pose(std::span<const Point2> joints, const Box& box);

/// Interleaved sin/cos of k at frequencies 2*pi / temperature^(2j/dim).
std::vector<double> sine_encode(double k, std::size_t dim, double temperature = 20.0);

/// P = MLP(Cat(sigma(x0), sigma(y0), ..., sigma(xn), sigma(yn))), [Q, D].
/// The MLP must have three layers with input width kp.width() * sine_dim.
Tensor structural_embedding(const LearnableKeypoints& kp, const Mlp& mlp, std::size_t sine_dim);

/// Re-sorts corners componentwise so p0 <= p1 and clamps all coordinates
/// into [kCoordLo, kCoordHi].
LearnableKeypoints sanitize(const LearnableKeypoints& kp);

/// Corners move in logit space, the pose part additively in its stored space.
/// box_delta [Q,4], pose_delta [Q,2n]. The result is sanitized.
LearnableKeypoints refine(const LearnableKeypoints& kp, const Tensor& box_delta, const Tensor& pose_delta);

/// Corners uniform in [0,1] and sorted; joints at the box center.
Tensor initial_keypoint_coords(std::size_t num_queries, std::size_t n_pose, PoseSpace space, Rng& rng);

}  // namespace hcq
