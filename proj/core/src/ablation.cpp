#include "hcq/ablation.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <sstream>

#include "hcq/model.hpp"
#include "hcq/trainer.hpp"

namespace hcq {

std::vector<AblationVariant> ablation_variants(const RunConfig& base) {
  AblationVariant canonical{"canonical", base};
  canonical.config.decoder.canonical_space = true;
  canonical.config.decoder.head_condition = HeadCondition::CanonicalCoords;
  AblationVariant image{"image", canonical.config};
  image.config.decoder.canonical_space = false;
  image.config.decoder.head_condition = HeadCondition::ImageCoords;
  AblationVariant quota0{"quota0", canonical.config};
  quota0.config.decoder.keypoint_quota = 0;
  return {canonical, image, quota0};
}

ProvenanceCheck check_quota_provenance(const RunConfig& base) {
  RunConfig zero = base;
  zero.decoder.keypoint_quota = 0;
  HcqModel a(base.decoder, base.seed);
  HcqModel b(zero.decoder, zero.seed);
  ProvenanceCheck r;
  r.parameters_match = true;
  const auto& sa = a.parameters();
  const auto& sb = b.parameters();
  auto names_of = [](const ParameterStore& s) {
    std::vector<std::string> n;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s.name(i).find(".offsets.") == std::string::npos) n.push_back(s.name(i));
    }
    return n;
  };
  if (names_of(sa) != names_of(sb)) {
    r.parameters_match = false;
    r.mismatched.push_back("<parameter layout>");
  } else {
    for (const auto& name : names_of(sa)) {
      const auto& ta = sa.get(name);
      const auto& tb = sb.get(name);
      if (ta.shape() != tb.shape() ||
          std::memcmp(ta.data().data(), tb.data().data(), ta.numel() * sizeof(double)) != 0) {
        r.parameters_match = false;
        r.mismatched.push_back(name);
      }
    }
  }

  const auto scene = generate_scene(base.dataset.train_seed, base.dataset.scene);
  NoGradGuard guard;
  const auto oa = a.forward(image_tensor(scene));
  const auto ob = b.forward(image_tensor(scene));
  for (std::size_t l = 0; l < oa.layers.size(); ++l) {
    if (oa.layers[l].plan.from_keypoints != ob.layers[l].plan.from_keypoints) r.masks_differ = true;
  }
  return r;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double AblationReport::median_pose_ap(const std::string& variant) const {
  std::vector<double> v;
  for (const auto& r : runs) {
    if (r.variant == variant) v.push_back(r.metrics.pose_ap50);
  }
  return median(v);
}

bool AblationReport::canonical_at_least_image() const {
  return median_pose_ap("canonical") >= median_pose_ap("image");
}

bool AblationReport::quota_at_least_zero() const { return median_pose_ap("canonical") >= median_pose_ap("quota0"); }

std::string AblationReport::table() const {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof(line), "%-10s %6s %9s %9s %9s %9s %11s\n", "variant", "seed", "pose@0.5", "pose@0.75",
                "box@0.5", "mask@0.5", "final_loss");
  os << line;
  for (const auto& r : runs) {
    std::snprintf(line, sizeof(line), "%-10s %6llu %9.4f %9.4f %9.4f %9.4f %11.5f\n", r.variant.c_str(),
                  static_cast<unsigned long long>(r.seed), r.metrics.pose_ap50, r.metrics.pose_ap75,
                  r.metrics.box_ap50, r.metrics.mask_ap50, r.final_loss);
    os << line;
  }
  for (const char* v : {"canonical", "image", "quota0"}) {
    std::snprintf(line, sizeof(line), "median pose AP@0.5 %-10s %.4f\n", v, median_pose_ap(v));
    os << line;
  }
  os << "canonical >= image: " << (canonical_at_least_image() ? "yes" : "no") << '\n';
  os << "quota " << quota << " >= quota 0: " << (quota_at_least_zero() ? "yes" : "no") << '\n';
  os << "step-0 provenance check: " << (provenance.passed() ? "ok" : "FAILED") << '\n';
  return os.str();
}

AblationReport run_ablation(const AblationOptions& options, const std::function<void(const AblationRun&)>& on_run) {
  AblationReport report;
  report.provenance = check_quota_provenance(options.base);
  report.quota = options.base.decoder.keypoint_quota;
  const auto train = training_scenes(options.base);
  const auto held_out = evaluation_scenes(options.base);
  for (const auto& variant : ablation_variants(options.base)) {
    for (const auto seed : options.seeds) {
      RunConfig c = variant.config;
      c.seed = seed;
      Trainer trainer(c, train);
      double last = 0.0;
      for (std::size_t it = 0; it < c.iterations; ++it) last = trainer.step().total;
      AblationRun run{variant.name, seed, evaluate(trainer.model(), held_out, c).metrics, last};
      if (on_run) on_run(run);
      report.runs.push_back(run);
    }
  }
  return report;
}

}  // namespace hcq
