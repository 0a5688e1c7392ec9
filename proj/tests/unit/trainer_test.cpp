#include <gtest/gtest.h>

#include "hcq/trainer.hpp"
#include "tiny_run.hpp"

using namespace hcq;

namespace {

std::vector<std::string> loss_log(const RunConfig& cfg, std::size_t steps) {
  Trainer t(cfg, training_scenes(cfg));
  std::vector<std::string> log;
  for (std::size_t i = 0; i < steps; ++i) log.push_back(format_step_record(t.step()));
  return log;
}

}  // namespace

TEST(Trainer, LossLogIsBitExactAcrossRuns) {
  auto cfg = tiny::run_config();
  cfg.augment.enabled = true;
  cfg.augment.crop_size = 32;
  EXPECT_EQ(loss_log(cfg, 3), loss_log(cfg, 3));
}

TEST(Trainer, ResumeReproducesLog) {
  const auto cfg = tiny::run_config();
  const auto full = loss_log(cfg, 4);
  Trainer a(cfg, training_scenes(cfg));
  a.step();
  a.step();
  const auto ckpt = a.checkpoint();
  Trainer b(cfg, training_scenes(cfg));
  b.restore(ckpt);
  EXPECT_EQ(format_step_record(b.step()), full[2]);
  EXPECT_EQ(format_step_record(b.step()), full[3]);
}

TEST(Trainer, SeedChangesInitialization) {
  auto a = tiny::run_config(), b = tiny::run_config();
  b.seed = 1;
  EXPECT_NE(loss_log(a, 1), loss_log(b, 1));
}

TEST(Trainer, RepeatedStepsReduceLoss) {
  auto cfg = tiny::run_config();
  cfg.dataset.train_count = 2;
  cfg.optim.adamw.lr = 3e-3;
  Trainer t(cfg, training_scenes(cfg));
  const auto scene = training_scenes(cfg).front();
  const double before = scene_loss(t.model(), scene, cfg).total_value;
  for (int i = 0; i < 30; ++i) t.step();
  EXPECT_LT(scene_loss(t.model(), scene, cfg).total_value, before);
}

TEST(Trainer, RecordIsPrintedWithFullPrecision) {
  StepRecord r;
  r.iteration = 3;
  r.total = 0.1;
  const auto s = format_step_record(r);
  EXPECT_NE(s.find("\"iteration\":3"), std::string::npos);
  EXPECT_NE(s.find("0.10000000000000001"), std::string::npos);
  EXPECT_EQ(nlohmann::json::parse(s)["total"].get<double>(), 0.1);
}

TEST(Trainer, DetectionsCoverEveryQuery) {
  const auto cfg = tiny::run_config();
  Trainer t(cfg, training_scenes(cfg));
  const auto scenes = evaluation_scenes(cfg);
  NoGradGuard ng;
  const auto out = t.model().forward(image_tensor(scenes.front()));
  const auto dets = extract_detections(out.predictions.back(), 0);
  ASSERT_EQ(dets.size(), 4u);
  for (const auto& d : dets) {
    EXPECT_GT(d.score, 0.0);
    EXPECT_LT(d.score, 1.0);
    EXPECT_EQ(d.mask.size(), 16u);
    EXPECT_EQ(d.joints.size(), 5u);
  }
  const auto ev = evaluate(t.model(), scenes, cfg);
  EXPECT_EQ(ev.metrics.images, 2u);
  EXPECT_EQ(ev.metrics.detections, 8u);
}

TEST(Trainer, GroundTruthsMirrorInstances) {
  const auto cfg = tiny::run_config();
  const auto s = generate_scene(4, cfg.dataset.scene);
  const auto g = ground_truths(s, 7, 8);
  ASSERT_EQ(g.size(), s.instances.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_EQ(g[i].image, 7u);
    EXPECT_EQ(g[i].box.x1, s.instances[i].box.x1);
    EXPECT_EQ(g[i].mask.size(), 16u);
  }
}
