#include <gtest/gtest.h>

#include "reference_checks.hpp"
#include "hcq/backbone.hpp"

using namespace hcq;

TEST(Backbone, PyramidResolutions) {
  ParameterStore store;
  Rng init(1);
  StubBackbone bb(store, 16, 3, init);
  std::mt19937_64 rng(71);
  const auto out = bb(checks::random_tensor({128, 128, 3}, rng));
  ASSERT_EQ(out.pyramid.num_levels(), 3u);
  EXPECT_EQ(out.pyramid.levels[0].shape(), (Shape{4, 4, 16}));
  EXPECT_EQ(out.pyramid.levels[1].shape(), (Shape{8, 8, 16}));
  EXPECT_EQ(out.pyramid.levels[2].shape(), (Shape{16, 16, 16}));
  EXPECT_EQ(out.pixel_embedding.shape(), (Shape{256, 16}));
  EXPECT_EQ(out.mask_height, 16u);
}

TEST(Backbone, ZeroImageAndBiasGiveZeroFeatures) {
  ParameterStore store;
  Rng init(2);
  StubBackbone bb(store, 8, 3, init);
  for (Linear* l : {&bb.stage8, &bb.stage16, &bb.stage32})
    for (auto& v : l->bias.mutable_data()) v = 0.0;
  const auto out = bb(Tensor::zeros({32, 32, 3}));
  for (const auto& level : out.pyramid.levels)
    for (double v : level.data()) EXPECT_EQ(v, 0.0);
}

TEST(Backbone, ConvMatchesNaiveLoops) {
  ParameterStore store;
  Rng init(3);
  Linear w(store, "conv", 2 * 2 * 3, 5, init);
  std::mt19937_64 rng(72);
  const Tensor img = checks::random_tensor({6, 8, 3}, rng);
  const auto out = conv2d(img, w, 2, 2);
  ASSERT_EQ(out.shape(), (Shape{3, 4, 5}));
  for (std::size_t oy = 0; oy < 3; ++oy)
    for (std::size_t ox = 0; ox < 4; ++ox)
      for (std::size_t o = 0; o < 5; ++o) {
        double s = w.bias[o];
        for (std::size_t ky = 0; ky < 2; ++ky)
          for (std::size_t kx = 0; kx < 2; ++kx)
            for (std::size_t c = 0; c < 3; ++c)
              s += img[((2 * oy + ky) * 8 + 2 * ox + kx) * 3 + c] * w.weight[((ky * 2 + kx) * 3 + c) * 5 + o];
        EXPECT_NEAR(out[(oy * 4 + ox) * 5 + o], s, 1e-12);
      }
}

TEST(Backbone, PositionalCodeShape) {
  const auto p = grid_positional_code(4, 4);
  EXPECT_EQ(p.shape(), (Shape{16, StubBackbone::kPositionalDim}));
  EXPECT_NE(oracle::values_of(index_select(p, 0, {0})), oracle::values_of(index_select(p, 0, {5})));
}

TEST(Backbone, RejectsIndivisibleImage) {
  ParameterStore store;
  Rng init(4);
  StubBackbone bb(store, 8, 3, init);
  EXPECT_THROW(bb(Tensor::zeros({40, 40, 3})), ShapeError);
}
