#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hcq/config.hpp"
#include "hcq/metrics.hpp"

namespace hcq {

/// "canonical": canonical pose space, base quota. "image": image-space
/// pose. "quota0": canonical with no keypoint-derived sampling slots.
struct AblationVariant {
  std::string name;
  RunConfig config;
};

std::vector<AblationVariant> ablation_variants(const RunConfig& base);

struct AblationRun {
  std::string variant;
  std::uint64_t seed = 0;
  MetricsReport metrics;
  double final_loss = 0.0;
};

/// Step-0 comparison of quota 0 against the base quota under one seed: every
/// parameter outside the generated-offset layers must agree bit-exactly and
/// the sampling-plan provenance masks must differ.
struct ProvenanceCheck {
  bool masks_differ = false;
  bool parameters_match = false;
  std::vector<std::string> mismatched;

  bool passed() const { return masks_differ && parameters_match; }
};

ProvenanceCheck check_quota_provenance(const RunConfig& base);

struct AblationReport {
  std::vector<AblationRun> runs;
  ProvenanceCheck provenance;
  std::size_t quota = 16;  // keypoint quota of the canonical variant

  double median_pose_ap(const std::string& variant) const;
  bool canonical_at_least_image() const;
  bool quota_at_least_zero() const;
  std::string table() const;
};

struct AblationOptions {
  RunConfig base;
  std::vector<std::uint64_t> seeds{0, 1, 2};
};

AblationReport run_ablation(const AblationOptions& options,
                            const std::function<void(const AblationRun&)>& on_run = {});

double median(std::vector<double> values);

}  // namespace hcq
