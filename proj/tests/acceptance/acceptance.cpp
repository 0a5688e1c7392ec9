// One PASS/FAIL line per acceptance criterion. Criterion 6 is a statistical
// expectation: it is reported but does not set the exit code.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "hcq/ablation.hpp"
#include "hcq/checkpoint.hpp"
#include "hcq/gradcheck.hpp"
#include "hcq/trainer.hpp"
#include "reference_checks.hpp"

using namespace hcq;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  int failures = 0;
  nlohmann::json report = nlohmann::json::object();

  void line(int id, const std::string& name, bool ok, const std::string& detail, bool gating = true) {
    std::printf("%s %d %s: %s%s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str(),
                gating ? "" : " (non-gating)");
    std::fflush(stdout);
    if (!ok && gating) ++failures;
    report[std::to_string(id)] = {{"name", name}, {"pass", ok}, {"detail", detail}, {"gating", gating}};
  }
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void progress(const std::string& s) {
  std::fprintf(stderr, "# %s\n", s.c_str());
  std::fflush(stderr);
}

void grad_check(Outcome& out) {
  GradCheckOptions o;
  const auto t0 = Clock::now();
  const auto results = grad_check_sweep(o);
  const double secs = seconds_since(t0);
  double worst = 0;
  std::string worst_name;
  for (const auto& r : results) {
    if (r.max_relative_error >= worst) {
      worst = r.max_relative_error;
      worst_name = r.name;
    }
  }
  out.line(1, "grad-check", worst < o.threshold && secs < 120.0,
           fmt("%zu ops x %zu points, max rel err %.3g (%s), %.1f s", results.size(), o.points, worst,
               worst_name.c_str(), secs));
}

void reference_oracles(Outcome& out) {
  const std::pair<const char*, double> items[] = {
      {"bbox", checks::bbox()},
      {"keypoints", checks::keypoints()},
      {"embedding", checks::embedding()},
      {"sample_deform", checks::sample_deform()},
      {"sampling", checks::sampling()},
      {"deform_out", checks::deform_out()},
      {"multi_scale", checks::multi_scale()},
      {"hungarian", checks::hungarian()},
      {"l_total", checks::total()},
  };
  bool ok = true;
  std::string detail;
  for (const auto& [name, err] : items) {
    ok = ok && err < 1e-10;
    detail += fmt("%s%s %.2g", detail.empty() ? "" : ", ", name, err);
  }
  out.line(2, "reference-oracles", ok, detail);
}

void equivariance(Outcome& out) {
  const double worst = checks::affine_equivariance(1000);
  out.line(3, "canonical-equivariance", worst < 1e-12, fmt("1000 trials, max err %.3g", worst));
}

void matching(Outcome& out) {
  const auto r = checks::hungarian_exhaustive(200);
  out.line(4, "matching-optimality", r.mismatches == 0 && r.trials == 200,
           fmt("%d trials, %d suboptimal, worst gap %.3g", r.trials, r.mismatches, r.worst_gap));
}

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

bool same_outputs(const HcqModel::Output& a, const HcqModel::Output& b) {
  for (std::size_t l = 0; l < a.predictions.size(); ++l) {
    const auto& p = a.predictions[l];
    const auto& q = b.predictions[l];
    if (values(p.class_logits) != values(q.class_logits) || values(p.boxes) != values(q.boxes) ||
        values(p.box_scales) != values(q.box_scales) || values(p.joints) != values(q.joints) ||
        values(p.pose_scales) != values(q.pose_scales))
      return false;
  }
  return values(a.predictions.back().mask_logits) == values(b.predictions.back().mask_logits);
}

// Criteria 5 and 7 share the desk-scale run.
void overfit_and_determinism(Outcome& out, const std::filesystem::path& work) {
  const RunConfig cfg;  // defaults are the desk-scale overfit probe
  const auto scenes = training_scenes(cfg);
  constexpr std::size_t kLogged = 20;

  const auto t0 = Clock::now();
  Trainer trainer(cfg, scenes);
  std::vector<std::string> log;
  while (trainer.iteration() < cfg.iterations) {
    const auto rec = trainer.step();
    if (log.size() < kLogged) log.push_back(format_step_record(rec));
    if (trainer.iteration() % 250 == 0) progress(fmt("overfit step %zu loss %.4f", trainer.iteration(), rec.total));
  }
  const auto ev = evaluate(trainer.model(), scenes, cfg);
  const double secs = seconds_since(t0);
  const auto& m = ev.metrics;
  out.line(5, "overfit-probe",
           m.box_ap50 >= 0.90 && m.mask_ap50 >= 0.85 && m.pose_ap50 >= 0.85 && secs <= 1800.0,
           fmt("box AP50 %.3f, mask AP50 %.3f, pose AP50 %.3f after %zu steps on %zu scenes, %.0f s", m.box_ap50,
               m.mask_ap50, m.pose_ap50, cfg.iterations, scenes.size(), secs));

  // A second run with the same seed/config must reproduce the log prefix.
  Trainer again(cfg, scenes);
  std::vector<std::string> relog;
  for (std::size_t i = 0; i < kLogged; ++i) relog.push_back(format_step_record(again.step()));
  const bool logs_equal = relog == log;

  // Checkpoint round trip through disk, then a pinned batch.
  const auto path = (work / "acceptance_final.bin").string();
  write_checkpoint(trainer.checkpoint(), path);
  Trainer restored(cfg, scenes);
  restored.restore(read_checkpoint(path));
  const auto second = capture_checkpoint(restored.model().parameters(), &restored.optimizer(), to_json(cfg),
                                         restored.iteration());
  bool arrays_equal = second.arrays.size() == trainer.checkpoint().arrays.size();
  const auto first = trainer.checkpoint();
  for (std::size_t i = 0; arrays_equal && i < first.arrays.size(); ++i)
    arrays_equal = first.arrays[i].name == second.arrays[i].name && first.arrays[i].values == second.arrays[i].values;
  bool outputs_equal = false;
  {
    NoGradGuard ng;
    const Tensor pinned = image_tensor(scenes.front());
    outputs_equal = same_outputs(trainer.model().forward(pinned), restored.model().forward(pinned));
  }
  const bool resumed_equal = format_step_record(trainer.step()) == format_step_record(restored.step());
  out.line(7, "determinism-persistence", logs_equal && arrays_equal && outputs_equal && resumed_equal,
           fmt("loss log %zu steps %s, checkpoint arrays %s, pinned forward %s, resumed step %s", kLogged,
               logs_equal ? "identical" : "DIFFERS", arrays_equal ? "identical" : "DIFFER",
               outputs_equal ? "identical" : "DIFFERS", resumed_equal ? "identical" : "DIFFERS"));

  // Criterion 8 on the trained model as well as the hand-composed oracle.
  double worst = checks::total();
  for (std::size_t i = 0; i < 4; ++i) {
    const auto r = scene_loss(trainer.model(), scenes[i], cfg);
    worst = std::max(worst, checks::total_is_weighted_sum(r));
  }
  out.line(8, "loss-contract", worst < 1e-12,
           fmt("weights (%g, %g, %g, %g), max |L_total - weighted sum| %.3g", cfg.loss.cls, cfg.loss.mask,
               cfg.loss.box, cfg.loss.pose, worst));
}

void ablation(Outcome& out) {
  AblationOptions o;
  o.base.dataset.train_count = 256;
  o.base.dataset.eval_count = 64;
  const auto t0 = Clock::now();
  const auto r = run_ablation(o, [](const AblationRun& run) {
    progress(fmt("ablation %s seed %llu: pose AP50 %.4f, box AP50 %.4f, mask AP50 %.4f", run.variant.c_str(),
                 static_cast<unsigned long long>(run.seed), run.metrics.pose_ap50, run.metrics.box_ap50,
                 run.metrics.mask_ap50));
  });
  std::fprintf(stderr, "%s", r.table().c_str());
  const double canon = r.median_pose_ap("canonical"), image = r.median_pose_ap("image"),
               zero = r.median_pose_ap("quota0");
  const bool ok = r.canonical_at_least_image() && r.quota_at_least_zero() && r.provenance.passed();
  out.line(6, "ablation-direction", ok,
           fmt("median pose AP50 over 3 seeds: canonical %.4f vs image %.4f (%s); quota %zu %.4f vs quota 0 %.4f "
               "(%s); provenance %s; 256 train / 64 held-out, %.0f s",
               canon, image, r.canonical_at_least_image() ? "holds" : "violated", r.quota, canon, zero,
               r.quota_at_least_zero() ? "holds" : "violated", r.provenance.passed() ? "ok" : "FAILED",
               seconds_since(t0)),
           false);
}

}  // namespace

int main(int argc, char** argv) {
  // --only 1,2,... restricts the run to the listed criteria.
  std::set<int> only;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::strcmp(argv[i], "--only") != 0) continue;
    for (char* tok = std::strtok(argv[i + 1], ","); tok; tok = std::strtok(nullptr, ",")) only.insert(std::atoi(tok));
  }
  auto wanted = [&](std::initializer_list<int> ids) {
    if (only.empty()) return true;
    for (int id : ids)
      if (only.count(id)) return true;
    return false;
  };

  const auto work = std::filesystem::current_path();
  Outcome out;
  try {
    if (wanted({1})) grad_check(out);
    if (wanted({2})) reference_oracles(out);
    if (wanted({3})) equivariance(out);
    if (wanted({4})) matching(out);
    if (wanted({5, 7, 8})) overfit_and_determinism(out, work);
    if (wanted({6})) ablation(out);
  } catch (const std::exception& e) {
    std::printf("FAIL aborted: %s\n", e.what());
    return 1;
  }
  std::ofstream(work / "acceptance_report.json") << out.report.dump(2) << '\n';
  return out.failures == 0 ? 0 : 1;
}
