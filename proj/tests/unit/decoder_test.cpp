#include <gtest/gtest.h>

#include "reference_checks.hpp"
#include "hcq/model.hpp"

using namespace hcq;

namespace {

DecoderConfig small_config() {
  DecoderConfig c;
  c.num_queries = 4;
  c.num_layers = 2;
  c.hidden = 16;
  c.ffn_dim = 32;
  return c;
}

FeaturePyramid random_pyramid(std::size_t dim, std::mt19937_64& rng) {
  return {{checks::random_tensor({1, 1, dim}, rng), checks::random_tensor({2, 2, dim}, rng),
           checks::random_tensor({4, 4, dim}, rng)}};
}

Tensor permute_rows(const Tensor& t, const std::vector<std::size_t>& perm) { return index_select(t, 0, perm); }

}  // namespace

TEST(Decoder, OutputShapes) {
  HcqModel model(small_config(), 3);
  std::mt19937_64 rng(61);
  const auto out = model.forward(checks::random_tensor({32, 32, 3}, rng));
  ASSERT_EQ(out.predictions.size(), 2u);
  for (const auto& p : out.predictions) {
    EXPECT_EQ(p.class_logits.shape(), (Shape{4, 1}));
    EXPECT_EQ(p.boxes.shape(), (Shape{4, 4}));
    EXPECT_EQ(p.box_scales.shape(), (Shape{4, 4}));
    EXPECT_EQ(p.pose.shape(), (Shape{4, 10}));
    EXPECT_EQ(p.joints.shape(), (Shape{4, 5, 2}));
  }
  EXPECT_FALSE(out.predictions[0].has_masks());
  ASSERT_TRUE(out.predictions[1].has_masks());
  EXPECT_EQ(out.predictions[1].mask_logits.shape(), (Shape{4, 16}));
  EXPECT_EQ(out.layers[0].plan.heads(), 4u);
}

TEST(Decoder, SameSeedSameOutputs) {
  HcqModel a(small_config(), 9), b(small_config(), 9);
  std::mt19937_64 rng(62);
  const Tensor img = checks::random_tensor({32, 32, 3}, rng);
  const auto oa = a.forward(img), ob = b.forward(img);
  for (std::size_t l = 0; l < 2; ++l) {
    EXPECT_EQ(oracle::values_of(oa.predictions[l].class_logits), oracle::values_of(ob.predictions[l].class_logits));
    EXPECT_EQ(oracle::values_of(oa.layers[l].keypoints.coords), oracle::values_of(ob.layers[l].keypoints.coords));
  }
  EXPECT_EQ(oracle::values_of(oa.predictions[1].mask_logits), oracle::values_of(ob.predictions[1].mask_logits));
}

TEST(Decoder, CornersStayOrdered) {
  HcqModel model(small_config(), 5);
  for (std::size_t i = 0; i < model.parameters().size(); ++i) {
    if (model.parameters().name(i).find(".box.") == std::string::npos) continue;
    Tensor t = model.parameters().tensor(i);
    for (auto& v : t.mutable_data()) v *= 20.0;
  }
  std::mt19937_64 rng(63);
  const auto out = model.forward(checks::random_tensor({32, 32, 3}, rng));
  for (const auto& l : out.layers)
    for (std::size_t q = 0; q < 4; ++q) {
      const auto k = l.keypoints.coords.data();
      const std::size_t w = l.keypoints.width();
      EXPECT_LE(k[q * w + 0], k[q * w + 2]);
      EXPECT_LE(k[q * w + 1], k[q * w + 3]);
    }
}

TEST(Decoder, ZeroRegressionHeadsKeepKeypoints) {
  ParameterStore store;
  Rng init(7);
  HcqDecoder dec(store, small_config(), init);
  for (auto& lw : dec.layers()) {
    lw.box.mlp.zero();
    lw.pose.mlp.zero();
  }
  std::mt19937_64 rng(64);
  const auto out = dec.run(random_pyramid(16, rng));
  const auto k0 = oracle::values_of(sanitize(make_keypoints(dec.initial_keypoints(), 5)).coords);
  for (const auto& l : out) EXPECT_LT(oracle::max_abs_diff(oracle::values_of(l.keypoints.coords), k0), 1e-12);
}

TEST(Decoder, QueryPermutationEquivariance) {
  ParameterStore store;
  Rng init(8);
  HcqDecoder dec(store, small_config(), init);
  std::mt19937_64 rng(65);
  const auto pyr = random_pyramid(16, rng);
  const Tensor e0 = checks::random_tensor({4, 16}, rng);
  const Tensor k0 = checks::random_keypoints(4, 5, rng);
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  const auto a = dec.run(pyr, e0, k0);
  const auto b = dec.run(pyr, permute_rows(e0, perm), permute_rows(k0, perm));
  for (std::size_t l = 0; l < 2; ++l) {
    EXPECT_LT(oracle::max_abs_diff(oracle::values_of(permute_rows(a[l].embedding, perm)),
                                   oracle::values_of(b[l].embedding)), 1e-12);
    EXPECT_LT(oracle::max_abs_diff(oracle::values_of(permute_rows(a[l].keypoints.coords, perm)),
                                   oracle::values_of(b[l].keypoints.coords)), 1e-12);
  }
}

TEST(Decoder, OneOptimizerStepMovesKeypoints) {
  HcqModel model(small_config(), 11);
  std::mt19937_64 rng(66);
  const Tensor img = checks::random_tensor({32, 32, 3}, rng);
  const auto before = model.forward(img);
  const Tensor loss = sum(before.predictions.back().boxes);
  backward(loss);
  double g = 0;
  for (const auto& t : model.parameters().tensors()) {
    if (!t.has_grad()) continue;
    for (double v : t.grad()) g += std::abs(v);
  }
  EXPECT_GT(g, 0.0);
}

TEST(Decoder, ValidatesPyramid) {
  ParameterStore store;
  Rng init(9);
  HcqDecoder dec(store, small_config(), init);
  std::mt19937_64 rng(67);
  FeaturePyramid two{{checks::random_tensor({2, 2, 16}, rng), checks::random_tensor({4, 4, 16}, rng)}};
  EXPECT_THROW(dec.run(two), ShapeError);
  EXPECT_THROW(dec.run(random_pyramid(8, rng)), ShapeError);
}

TEST(Decoder, FullScaleConfigIsValid) {
  const auto c = DecoderConfig::full_scale();
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.num_queries, 100u);
  EXPECT_EQ(c.hidden, 256u);
  EXPECT_EQ(c.sampling().points_per_head(), 4u);
}
