#include <gtest/gtest.h>

#include "hcq/ablation.hpp"
#include "tiny_run.hpp"

using namespace hcq;

TEST(Ablation, VariantsDifferOnlyWhereIntended) {
  const auto base = tiny::run_config();
  const auto v = ablation_variants(base);
  ASSERT_EQ(v.size(), 3u);
  EXPECT_EQ(v[0].name, "canonical");
  EXPECT_TRUE(v[0].config.decoder.canonical_space);
  EXPECT_EQ(v[0].config.decoder.keypoint_quota, 16u);
  EXPECT_EQ(v[1].name, "image");
  EXPECT_FALSE(v[1].config.decoder.canonical_space);
  EXPECT_EQ(v[1].config.decoder.head_condition, HeadCondition::ImageCoords);
  EXPECT_EQ(v[2].name, "quota0");
  EXPECT_TRUE(v[2].config.decoder.canonical_space);
  EXPECT_EQ(v[2].config.decoder.keypoint_quota, 0u);
}

TEST(Ablation, QuotaProvenanceHolds) {
  const auto p = check_quota_provenance(tiny::run_config());
  EXPECT_TRUE(p.masks_differ);
  EXPECT_TRUE(p.parameters_match);
  EXPECT_TRUE(p.mismatched.empty());
  EXPECT_TRUE(p.passed());
}

TEST(Ablation, Median) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 3, 2}), 2.5);
}

TEST(Ablation, TinyRunProducesTable) {
  AblationOptions o;
  o.base = tiny::run_config();
  o.base.iterations = 1;
  o.seeds = {0};
  std::size_t seen = 0;
  const auto r = run_ablation(o, [&](const AblationRun&) { ++seen; });
  EXPECT_EQ(seen, 3u);
  EXPECT_EQ(r.runs.size(), 3u);
  EXPECT_TRUE(r.provenance.passed());
  EXPECT_NE(r.table().find("quota0"), std::string::npos);
}
