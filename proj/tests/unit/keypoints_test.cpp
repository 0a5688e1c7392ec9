#include <gtest/gtest.h>

#include <random>

#include "hcq/keypoints.hpp"
#include "hcq/nn.hpp"
#include "hcq/ops.hpp"
#include "reference_checks.hpp"

using namespace hcq;

namespace {

Tensor row(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor({1, n}, std::move(v));
}

Tensor random_keypoints(std::size_t q, std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0), c(-0.3, 1.3);
  std::vector<double> v;
  for (std::size_t i = 0; i < q; ++i) {
    double a = u(rng), b = u(rng), x = u(rng), y = u(rng);
    v.insert(v.end(), {std::min(a, b), std::min(x, y), std::max(a, b), std::max(x, y)});
    for (std::size_t j = 0; j < 2 * n; ++j) v.push_back(c(rng));
  }
  return Tensor({q, 2 * (n + 2)}, v);
}

}  // namespace

TEST(Keypoints, CenterExtentExample) {
  const auto kp = make_keypoints(row({0.2, 0.2, 0.6, 0.8, 0.5, 0.5}), 1);
  const auto parts = bbox_center_extent(kp);
  EXPECT_NEAR(parts.centers[0], 0.4, 1e-15);
  EXPECT_NEAR(parts.centers[1], 0.5, 1e-15);
  EXPECT_NEAR(parts.extents[0], 0.4, 1e-15);
  EXPECT_NEAR(parts.extents[1], 0.6, 1e-15);
}

TEST(Keypoints, DegenerateBoxHasZeroExtent) {
  const auto parts = bbox_center_extent(make_keypoints(row({0.5, 0.5, 0.5, 0.5, 0.1, 0.1}), 1));
  EXPECT_EQ(parts.centers[0], 0.5);
  EXPECT_EQ(parts.extents[0], 0.0);
  EXPECT_EQ(parts.extents[1], 0.0);
}

TEST(Keypoints, CenterExtentMatchesDirectFormula) {
  std::mt19937_64 rng(1);
  const Tensor k = random_keypoints(6, 5, rng);
  const auto parts = bbox_center_extent(make_keypoints(k, 5));
  const auto rows = oracle::rows_of(k);
  for (std::size_t q = 0; q < 6; ++q) {
    const auto b = oracle::center_extent(rows[q]);
    EXPECT_NEAR(parts.centers[2 * q], b.cx, 1e-10);
    EXPECT_NEAR(parts.centers[2 * q + 1], b.cy, 1e-10);
    EXPECT_NEAR(parts.extents[2 * q], b.w, 1e-10);
    EXPECT_NEAR(parts.extents[2 * q + 1], b.h, 1e-10);
  }
}

TEST(Keypoints, PoseToImageExamples) {
  const auto j = pose_to_image(make_keypoints(row({0.2, 0.2, 0.6, 0.8, 0.5, 0.5, 0, 0, 1, 1}), 3));
  ASSERT_EQ(j.shape(), (Shape{1, 3, 2}));
  EXPECT_NEAR(j[0], 0.4, 1e-15);
  EXPECT_NEAR(j[1], 0.5, 1e-15);
  EXPECT_NEAR(j[2], 0.2, 1e-15);
  EXPECT_NEAR(j[3], 0.2, 1e-15);
  EXPECT_NEAR(j[4], 0.6, 1e-15);
  EXPECT_NEAR(j[5], 0.8, 1e-15);
}

TEST(Keypoints, PoseToImageMatchesAffineOracle) {
  std::mt19937_64 rng(2);
  const Tensor k = random_keypoints(8, 5, rng);
  const auto j = pose_to_image(make_keypoints(k, 5));
  const auto rows = oracle::rows_of(k);
  for (std::size_t q = 0; q < 8; ++q) {
    const auto want = oracle::joints_to_image(rows[q]);
    for (std::size_t i = 0; i < 5; ++i) {
      EXPECT_NEAR(j[(q * 5 + i) * 2], want[i].first, 1e-10);
      EXPECT_NEAR(j[(q * 5 + i) * 2 + 1], want[i].second, 1e-10);
    }
  }
}

TEST(Keypoints, AffineEquivariance) { EXPECT_LT(checks::affine_equivariance(), 1e-12); }

TEST(Keypoints, ImageToPoseRoundTrip) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double x0 = u(rng) * 0.5, y0 = u(rng) * 0.5;
    const Box box{x0, y0, x0 + 0.05 + u(rng) * 0.4, y0 + 0.05 + u(rng) * 0.4};
    std::vector<Point2> joints;
    for (int i = 0; i < 5; ++i) joints.push_back({u(rng), u(rng)});
    const auto back = pose_to_image(image_to_pose(joints, box), box);
    for (int i = 0; i < 5; ++i) {
      EXPECT_LT(std::abs(back[i].x - joints[i].x), 1e-12);
      EXPECT_LT(std::abs(back[i].y - joints[i].y), 1e-12);
    }
  }
  const Box box{0.1, 0.2, 0.5, 0.9};
  const auto c = image_to_pose(std::vector<Point2>{{0.1, 0.2}}, box);
  EXPECT_EQ(c[0].x, 0.0);
  EXPECT_EQ(c[0].y, 0.0);
}

TEST(Keypoints, ImageToPoseRejectsDegenerateBox) {
  const std::vector<Point2> j{{0.5, 0.5}};
  EXPECT_THROW(image_to_pose(j, Box{0.5, 0.1, 0.5, 0.9}), DegenerateBoxError);
  EXPECT_THROW(image_to_pose(j, Box{0.1, 0.5, 0.9, 0.5 + 1e-7}), DegenerateBoxError);
}

TEST(Keypoints, StructuralEmbeddingZeroWeightsGiveBias) {
  ParameterStore store;
  Rng rng(5);
  Mlp mlp(store, "p", 4 * 14, 8, 8, 3, rng);
  mlp.zero();
  auto b = mlp.layers[2].bias.mutable_data();
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = static_cast<double>(i);
  std::mt19937_64 g(6);
  const auto p = structural_embedding(make_keypoints(random_keypoints(3, 5, g), 5), mlp, 4);
  for (std::size_t q = 0; q < 3; ++q)
    for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(p[q * 8 + i], static_cast<double>(i));
}

TEST(Keypoints, StructuralEmbeddingMatchesChainOracle) {
  // Q=2, five keypoints (two corners, three joints), D=8, D'=4.
  ParameterStore store;
  Rng rng(7);
  const std::size_t n = 3, dprime = 4, d = 8;
  Mlp mlp(store, "p", 2 * (n + 2) * dprime, d, d, 3, rng);
  std::normal_distribution<double> nd(0.0, 0.5);
  for (auto& l : mlp.layers) {
    for (auto& w : l.weight.mutable_data()) w = nd(rng);
    for (auto& w : l.bias.mutable_data()) w = nd(rng);
  }
  std::mt19937_64 g(8);
  const Tensor k = random_keypoints(2, n, g);
  const auto got = structural_embedding(make_keypoints(k, n), mlp, dprime);
  const auto rows = oracle::rows_of(k);
  for (std::size_t q = 0; q < 2; ++q) {
    oracle::Vec code;
    for (double c : rows[q]) {
      const auto s = oracle::sine(c, dprime);
      code.insert(code.end(), s.begin(), s.end());
    }
    auto h = oracle::relu(oracle::affine(code, mlp.layers[0].weight, mlp.layers[0].bias));
    h = oracle::relu(oracle::affine(h, mlp.layers[1].weight, mlp.layers[1].bias));
    h = oracle::affine(h, mlp.layers[2].weight, mlp.layers[2].bias);
    for (std::size_t i = 0; i < d; ++i) EXPECT_NEAR(got[q * d + i], h[i], 1e-10);
  }
}

TEST(Keypoints, StructuralEmbeddingRejectsShapeMismatch) {
  ParameterStore store;
  Rng rng(9);
  Mlp wrong(store, "p", 10, 8, 8, 3, rng);
  std::mt19937_64 g(1);
  EXPECT_THROW(structural_embedding(make_keypoints(random_keypoints(1, 5, g), 5), wrong, 4), ShapeError);
  Mlp two(store, "q", 56, 8, 8, 2, rng);
  EXPECT_THROW(structural_embedding(make_keypoints(random_keypoints(1, 5, g), 5), two, 4), ShapeError);
}

TEST(Keypoints, IdenticalKeypointsGiveIdenticalEmbeddings) {
  ParameterStore store;
  Rng rng(10);
  Mlp mlp(store, "p", 56, 8, 8, 3, rng);
  std::mt19937_64 g(2);
  const auto one = oracle::values_of(random_keypoints(1, 5, g));
  auto two = one;
  two.insert(two.end(), one.begin(), one.end());
  const auto p = structural_embedding(make_keypoints(Tensor({2, 14}, two), 5), mlp, 4);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(p[i], p[8 + i]);
}

TEST(Keypoints, SanitizeSortsCornersAndClamps) {
  const auto kp = sanitize(make_keypoints(row({0.8, 0.1, 0.2, 0.9, 2.0, -1.0}), 1));
  EXPECT_EQ(oracle::values_of(kp.coords), (std::vector<double>{0.2, 0.1, 0.8, 0.9, 1.5, -0.5}));
}

TEST(Keypoints, RefineWithZeroDeltaIsIdentity) {
  std::mt19937_64 g(3);
  const Tensor k = random_keypoints(4, 5, g);
  const auto kp = sanitize(make_keypoints(k, 5));
  const auto out = refine(kp, Tensor::zeros({4, 4}), Tensor::zeros({4, 10}));
  EXPECT_LT(oracle::max_abs_diff(oracle::values_of(out.coords), oracle::values_of(kp.coords)), 1e-12);
}

TEST(Keypoints, InitialCoordsAreSortedBoxesWithCenteredJoints) {
  Rng rng(11);
  const auto k = initial_keypoint_coords(10, 5, PoseSpace::Canonical, rng);
  const auto rows = oracle::rows_of(k);
  for (const auto& r : rows) {
    EXPECT_LE(r[0], r[2]);
    EXPECT_LE(r[1], r[3]);
    for (std::size_t i = 4; i < r.size(); ++i) EXPECT_EQ(r[i], 0.5);
  }
}
