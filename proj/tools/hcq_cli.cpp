#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hcq/ablation.hpp"
#include "hcq/checkpoint.hpp"
#include "hcq/config.hpp"
#include "hcq/dataset_io.hpp"
#include "hcq/gradcheck.hpp"
#include "hcq/overlay.hpp"
#include "hcq/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNonFinite = 3;

json metrics_json(const hcq::MetricsReport& m) {
  return {{"box_ap50", m.box_ap50},   {"box_ap75", m.box_ap75},   {"mask_ap50", m.mask_ap50},
          {"mask_ap75", m.mask_ap75}, {"pose_ap50", m.pose_ap50}, {"pose_ap75", m.pose_ap75},
          {"images", m.images},       {"ground_truths", m.ground_truths}, {"detections", m.detections},
          {"wall_clock_seconds", m.wall_clock_seconds}};
}

// Restores parameters only; the checkpoint's config must share the model shape.
void load_weights(hcq::HcqModel& model, const std::string& path) {
  const auto ckpt = hcq::read_checkpoint(path);
  hcq::restore_parameters(ckpt, model.parameters());
}

void write_line(std::ostream& out, const json& j) { out << j.dump() << '\n'; }

int cmd_train(const hcq::RunConfig& config, const std::string& resume) {
  fs::create_directories(config.output_dir);
  const fs::path dir(config.output_dir);
  hcq::Trainer trainer(config, hcq::training_scenes(config));
  if (!resume.empty()) trainer.restore(hcq::read_checkpoint(resume));
  std::ofstream log(dir / "loss.jsonl", resume.empty() ? std::ios::trunc : std::ios::app);
  const auto t0 = std::chrono::steady_clock::now();
  while (trainer.iteration() < config.iterations) {
    const auto rec = trainer.step();
    log << hcq::format_step_record(rec) << '\n';
    const std::size_t done = trainer.iteration();
    if (config.checkpoint_every && done % config.checkpoint_every == 0) {
      hcq::write_checkpoint(trainer.checkpoint(), (dir / ("ckpt_" + std::to_string(done) + ".bin")).string());
    }
    if (done % 100 == 0 || done == config.iterations) {
      std::printf("iter %zu loss %.6f\n", done, rec.total);
      std::fflush(stdout);
    }
  }
  hcq::write_checkpoint(trainer.checkpoint(), (dir / "final.bin").string());
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ofstream(dir / "train_report.json")
      << json{{"config", hcq::to_json(config)}, {"threads", 1}, {"iterations", trainer.iteration()}, {"wall_clock_seconds", secs}}.dump(2)
      << '\n';
  return 0;
}

int cmd_eval(const hcq::RunConfig& config, const std::string& checkpoint, const std::string& report_path) {
  hcq::HcqModel model(config.decoder, config.seed);
  if (!checkpoint.empty()) load_weights(model, checkpoint);
  const auto scenes = hcq::evaluation_scenes(config);
  const auto ev = hcq::evaluate(model, scenes, config);
  json report = {{"config", hcq::to_json(config)}, {"threads", 1}, {"checkpoint", checkpoint},
                 {"metrics", metrics_json(ev.metrics)}};
  std::vector<double> curve;
  if (!checkpoint.empty()) {
    const fs::path log = fs::path(checkpoint).parent_path() / "loss.jsonl";
    std::ifstream in(log);
    for (std::string line; std::getline(in, line);) curve.push_back(json::parse(line).at("total").get<double>());
  }
  report["loss_curve"] = curve;
  const std::string out = report_path.empty() ? (fs::path(config.output_dir) / "metrics.jsonl").string() : report_path;
  fs::create_directories(fs::path(out).parent_path().empty() ? fs::path(".") : fs::path(out).parent_path());
  std::ofstream(out, std::ios::app) << report.dump() << '\n';
  std::cout << metrics_json(ev.metrics).dump(2) << '\n';
  return 0;
}

int cmd_infer(const hcq::RunConfig& config, const std::string& checkpoint, std::size_t count, const std::string& out_dir) {
  hcq::HcqModel model(config.decoder, config.seed);
  if (!checkpoint.empty()) load_weights(model, checkpoint);
  const fs::path dir = out_dir.empty() ? fs::path(config.output_dir) / "infer" : fs::path(out_dir);
  fs::create_directories(dir);
  auto scenes = hcq::evaluation_scenes(config);
  if (count < scenes.size()) scenes.resize(count);
  std::ofstream preds(dir / "predictions.jsonl");
  hcq::NoGradGuard guard;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto out = model.forward(hcq::image_tensor(scenes[i]));
    auto dets = hcq::extract_detections(out.predictions.back(), i);
    std::erase_if(dets, [&](const hcq::Detection& d) { return d.score < config.score_threshold; });
    char name[64];
    std::snprintf(name, sizeof(name), "overlay_%04zu.ppm", i);
    hcq::write_ppm(hcq::render_overlay(scenes[i], dets, config.dataset.mask_factor), (dir / name).string());
    preds << hcq::predictions_record(i, scenes[i], dets) << '\n';
  }
  std::printf("wrote %zu overlays to %s\n", scenes.size(), dir.string().c_str());
  return 0;
}

int cmd_generate(const hcq::RunConfig& config, const std::string& out_dir, const std::string& split) {
  const auto scenes = split == "eval" ? hcq::evaluation_scenes(config)
                                      : hcq::generate_scenes(config.dataset.train_seed, config.dataset.train_count,
                                                             config.dataset.scene);
  hcq::export_dataset(out_dir, scenes);
  std::printf("wrote %zu samples to %s\n", scenes.size(), out_dir.c_str());
  return 0;
}

int cmd_grad_check(hcq::GradCheckOptions options) {
  bool ok = true;
  double worst = 0.0;
  for (const auto& c : hcq::standard_grad_cases()) {
    const auto r = hcq::run_grad_case(c, options);
    const bool pass = r.points == options.points && r.max_relative_error < options.threshold;
    ok = ok && pass;
    worst = std::max(worst, r.max_relative_error);
    std::printf("%-24s points %2zu redrawn %2zu max_rel_err %.3e %s\n", r.name.c_str(), r.points, r.redrawn,
                r.max_relative_error, pass ? "ok" : "FAIL");
  }
  std::printf("max relative error %.3e (threshold %.1e)\n", worst, options.threshold);
  return ok ? 0 : kExitFailure;
}

int cmd_ablate(const hcq::RunConfig& config, const std::vector<std::uint64_t>& seeds) {
  fs::create_directories(config.output_dir);
  hcq::AblationOptions options{config, seeds};
  std::ofstream runs(fs::path(config.output_dir) / "ablation.jsonl");
  const auto report = hcq::run_ablation(options, [&](const hcq::AblationRun& r) {
    write_line(runs, {{"variant", r.variant}, {"seed", r.seed}, {"final_loss", r.final_loss},
                      {"metrics", metrics_json(r.metrics)}, {"config", hcq::to_json(config)}, {"threads", 1}});
    runs.flush();
    std::printf("%s seed %llu pose AP %.4f\n", r.variant.c_str(), static_cast<unsigned long long>(r.seed),
                r.metrics.pose_ap50);
    std::fflush(stdout);
  });
  const auto table = report.table();
  std::ofstream(fs::path(config.output_dir) / "ablation_table.txt") << table;
  std::cout << table;
  return report.provenance.passed() ? 0 : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HCQ decoder harness: train, evaluate and inspect the keypoint-query model on synthetic scenes"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> overrides;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "JSON run config");
    sub->add_option("-s,--set", overrides, "Override as dotted.path=value (repeatable)");
  };

  std::string resume, checkpoint, report_path, out_dir, split = "train";
  std::size_t count = 8;
  hcq::GradCheckOptions gc;
  std::vector<std::uint64_t> seeds{0, 1, 2};

  auto* train = app.add_subcommand("train", "Train and write checkpoints plus loss.jsonl");
  add_common(train);
  train->add_option("--resume", resume, "Checkpoint to resume from");
  auto* eval = app.add_subcommand("eval", "Evaluate on the held-out scenes and append a metrics record");
  add_common(eval);
  eval->add_option("--checkpoint", checkpoint, "Weights to evaluate");
  eval->add_option("--report", report_path, "Metrics file (default <output_dir>/metrics.jsonl)");
  auto* infer = app.add_subcommand("infer", "Write PPM overlays and predictions.jsonl");
  add_common(infer);
  infer->add_option("--checkpoint", checkpoint, "Weights to use");
  infer->add_option("-n,--count", count, "Number of held-out scenes");
  infer->add_option("-o,--out", out_dir, "Output directory");
  auto* gen = app.add_subcommand("generate-data", "Export a scene set as a dataset directory");
  add_common(gen);
  gen->add_option("-o,--out", out_dir, "Output directory")->required();
  gen->add_option("--split", split, "train or eval")->check(CLI::IsMember({"train", "eval"}));
  auto* grad = app.add_subcommand("grad-check", "Finite-difference check of every differentiable op");
  add_common(grad);
  grad->add_option("--points", gc.points, "Random points per op");
  grad->add_option("--seed", gc.seed, "Sweep seed");
  grad->add_option("--threshold", gc.threshold, "Maximum relative error");
  auto* ablate = app.add_subcommand("ablate", "Canonical-vs-image and keypoint-quota comparison");
  add_common(ablate);
  ablate->add_option("--seeds", seeds, "Training seeds");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto config = hcq::load_run_config(config_path, overrides);
    if (train->parsed()) return cmd_train(config, resume);
    if (eval->parsed()) return cmd_eval(config, checkpoint, report_path);
    if (infer->parsed()) return cmd_infer(config, checkpoint, count, out_dir);
    if (gen->parsed()) return cmd_generate(config, out_dir, split);
    if (grad->parsed()) return cmd_grad_check(gc);
    if (ablate->parsed()) return cmd_ablate(config, seeds);
  } catch (const hcq::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const hcq::NonFiniteError& e) {
    std::cerr << "non-finite value: " << e.what() << '\n';
    return kExitNonFinite;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
