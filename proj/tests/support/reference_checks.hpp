#pragma once

// Each check builds a random instance, evaluates the library and an
// independent loop oracle, and returns the max absolute difference.

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "hcq/decoder.hpp"
#include "hcq/deform_attn.hpp"
#include "hcq/keypoints.hpp"
#include "hcq/losses.hpp"
#include "hcq/matching.hpp"
#include "hcq/nn.hpp"
#include "hcq/ops.hpp"
#include "oracles.hpp"

namespace checks {

using namespace hcq;

inline Tensor random_keypoints(std::size_t q, std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0), c(-0.3, 1.3);
  std::vector<double> v;
  for (std::size_t i = 0; i < q; ++i) {
    const double a = u(rng), b = u(rng), x = u(rng), y = u(rng);
    v.insert(v.end(), {std::min(a, b), std::min(x, y), std::max(a, b), std::max(x, y)});
    for (std::size_t j = 0; j < 2 * n; ++j) v.push_back(c(rng));
  }
  return Tensor({q, 2 * (n + 2)}, v);
}

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double stddev = 1.0) {
  std::normal_distribution<double> d(0.0, stddev);
  std::vector<double> v(numel_of(shape));
  for (auto& x : v) x = d(rng);
  return Tensor(std::move(shape), std::move(v));
}

inline void randomize(Linear& l, std::mt19937_64& rng, double stddev = 0.5) {
  std::normal_distribution<double> d(0.0, stddev);
  for (auto& w : l.weight.mutable_data()) w = d(rng);
  for (auto& w : l.bias.mutable_data()) w = d(rng);
}

inline double bbox(std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  const Tensor k = random_keypoints(16, 5, rng);
  const auto parts = bbox_center_extent(make_keypoints(k, 5));
  double err = 0;
  const auto rows = oracle::rows_of(k);
  for (std::size_t q = 0; q < rows.size(); ++q) {
    const auto b = oracle::center_extent(rows[q]);
    err = std::max({err, std::abs(parts.centers[2 * q] - b.cx), std::abs(parts.centers[2 * q + 1] - b.cy),
                    std::abs(parts.extents[2 * q] - b.w), std::abs(parts.extents[2 * q + 1] - b.h)});
  }
  return err;
}

inline double keypoints(std::uint64_t seed = 2) {
  std::mt19937_64 rng(seed);
  const Tensor k = random_keypoints(16, 17, rng);
  const auto j = pose_to_image(make_keypoints(k, 17));
  const auto rows = oracle::rows_of(k);
  double err = 0;
  for (std::size_t q = 0; q < rows.size(); ++q) {
    const auto want = oracle::joints_to_image(rows[q]);
    for (std::size_t i = 0; i < want.size(); ++i) {
      err = std::max({err, std::abs(j[(q * 17 + i) * 2] - want[i].first), std::abs(j[(q * 17 + i) * 2 + 1] - want[i].second)});
    }
  }
  return err;
}

inline double embedding(std::uint64_t seed = 3) {
  std::mt19937_64 rng(seed);
  ParameterStore store;
  Rng init(seed);
  const std::size_t n = 3, dp = 4, d = 8;
  Mlp mlp(store, "p", 2 * (n + 2) * dp, d, d, 3, init);
  for (auto& l : mlp.layers) randomize(l, rng);
  const Tensor k = random_keypoints(2, n, rng);
  const auto got = structural_embedding(make_keypoints(k, n), mlp, dp);
  double err = 0;
  const auto rows = oracle::rows_of(k);
  for (std::size_t q = 0; q < rows.size(); ++q) {
    oracle::Vec code;
    for (double c : rows[q]) {
      const auto s = oracle::sine(c, dp);
      code.insert(code.end(), s.begin(), s.end());
    }
    auto h = oracle::relu(oracle::affine(code, mlp.layers[0].weight, mlp.layers[0].bias));
    h = oracle::relu(oracle::affine(h, mlp.layers[1].weight, mlp.layers[1].bias));
    h = oracle::affine(h, mlp.layers[2].weight, mlp.layers[2].bias);
    for (std::size_t i = 0; i < d; ++i) err = std::max(err, std::abs(got[q * d + i] - h[i]));
  }
  return err;
}

// Generated locations p_c + MLP(q) diag(d).
inline double sample_deform(std::uint64_t seed = 4) {
  std::mt19937_64 rng(seed);
  ParameterStore store;
  Rng init(seed);
  const SamplingConfig sc{4, 32, 16};
  DeformAttnWeights w(store, "da", 16, sc, 3, init);
  randomize(w.offsets, rng);
  const Tensor query = random_tensor({5, 16}, rng);
  const auto kp = make_keypoints(random_keypoints(5, 5, rng), 5);
  const auto gen = generated_slots_per_head(sc);
  const auto out = generate_offsets(query, bbox_center_extent(kp), w.offsets, gen);
  const auto rows = oracle::rows_of(kp.coords);
  const auto qrows = oracle::rows_of(query);
  double err = 0;
  for (std::size_t q = 0; q < 5; ++q) {
    const auto raw = oracle::affine(qrows[q], w.offsets.weight, w.offsets.bias);
    const auto b = oracle::center_extent(rows[q]);
    std::size_t col = 0;
    for (std::size_t m = 0; m < gen.size(); ++m) {
      for (std::size_t g = 0; g < gen[m]; ++g, col += 2) {
        const double x = b.cx + raw[col] * b.w, y = b.cy + raw[col + 1] * b.h;
        err = std::max({err, std::abs(out[m][(q * gen[m] + g) * 2] - x), std::abs(out[m][(q * gen[m] + g) * 2 + 1] - y)});
      }
    }
  }
  return err;
}

// One-hot attention on attend() exposes each stacked sample of V_m.
inline double sampling(std::uint64_t seed = 5) {
  std::mt19937_64 rng(seed);
  ParameterStore store;
  Rng init(seed);
  const SamplingConfig sc{2, 8, 4};
  const std::size_t q = 2, d = 8, dh = 4, np = 4;
  DeformAttnWeights w(store, "da", d, sc, 2, init);
  randomize(w.offsets, rng, 0.3);
  const auto kp = make_keypoints(random_keypoints(q, 5, rng), 5);
  const Tensor query = random_tensor({q, d}, rng);
  const auto plan = build_sampling_plan(kp, PoseSpace::Canonical, query, w.offsets, sc);
  const std::vector<Tensor> levels{random_tensor({3, 3, d}, rng), random_tensor({6, 5, d}, rng)};
  double err = 0;
  for (std::size_t s = 0; s < levels.size(); ++s) {
    const auto fmap = oracle::values_of(levels[s]);
    const std::size_t h = levels[s].size(0), wd = levels[s].size(1);
    for (std::size_t k = 0; k < np; ++k) {
      std::vector<Tensor> att;
      for (std::size_t m = 0; m < 2; ++m) {
        std::vector<double> a(q * 2 * np, 0.0);
        for (std::size_t i = 0; i < q; ++i) a[i * 2 * np + s * np + k] = 1.0;
        att.emplace_back(Shape{q, 2 * np}, a);
      }
      const auto out = attend(levels, plan, att);
      for (std::size_t m = 0; m < 2; ++m)
        for (std::size_t i = 0; i < q; ++i) {
          const auto& loc = plan.locations[m];
          const auto full = oracle::bilinear(fmap, h, wd, d, loc[(i * np + k) * 2], loc[(i * np + k) * 2 + 1]);
          for (std::size_t c = 0; c < dh; ++c) err = std::max(err, std::abs(out[i * d + m * dh + c] - full[m * dh + c]));
        }
    }
  }
  return err;
}

// Nested-loop DeformAttKey over levels x heads x points.
inline double deform_reference(std::size_t levels_count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParameterStore store;
  Rng init(seed);
  const std::size_t q = 2, d = 8, heads = 2, dh = d / heads, np = 4;
  const SamplingConfig sc{heads, heads * np, 4};
  DeformAttnWeights w(store, "da", d, sc, levels_count, init);
  for (auto* l : {&w.offsets, &w.attention, &w.value, &w.output}) randomize(*l, rng, 0.4);
  const auto kp = make_keypoints(random_keypoints(q, 5, rng), 5);
  const Tensor query = random_tensor({q, d}, rng);
  FeaturePyramid pyr;
  const std::size_t sizes[3][2] = {{2, 3}, {4, 5}, {7, 8}};
  for (std::size_t s = 0; s < levels_count; ++s) pyr.levels.push_back(random_tensor({sizes[s][0], sizes[s][1], d}, rng));
  const auto plan = build_sampling_plan(kp, PoseSpace::Canonical, query, w.offsets, sc);
  const auto got = deform_attn_keypoints(query, pyr, plan, w).output;

  const auto qrows = oracle::rows_of(query);
  const auto wv = oracle::rows_of(w.value.weight);
  std::vector<oracle::Vec> projected;
  for (const auto& lvl : pyr.levels) {
    const auto px = oracle::rows_of(reshape(lvl, {lvl.size(0) * lvl.size(1), d}));
    oracle::Vec flat;
    for (const auto& p : px) {
      const auto v = oracle::affine(p, w.value.weight, w.value.bias);
      flat.insert(flat.end(), v.begin(), v.end());
    }
    projected.push_back(flat);
  }
  double err = 0;
  for (std::size_t i = 0; i < q; ++i) {
    const auto logits = oracle::affine(qrows[i], w.attention.weight, w.attention.bias);
    oracle::Vec cat;
    for (std::size_t m = 0; m < heads; ++m) {
      const oracle::Vec lm(logits.begin() + static_cast<long>(m * levels_count * np),
                           logits.begin() + static_cast<long>((m + 1) * levels_count * np));
      const auto a = oracle::softmax(lm);
      oracle::Vec acc(dh, 0.0);
      for (std::size_t s = 0; s < levels_count; ++s)
        for (std::size_t p = 0; p < np; ++p) {
          const auto& loc = plan.locations[m];
          const auto v = oracle::bilinear(projected[s], pyr.levels[s].size(0), pyr.levels[s].size(1), d,
                                          loc[(i * np + p) * 2], loc[(i * np + p) * 2 + 1]);
          for (std::size_t c = 0; c < dh; ++c) acc[c] += a[s * np + p] * v[m * dh + c];
        }
      cat.insert(cat.end(), acc.begin(), acc.end());
    }
    const auto y = oracle::affine(cat, w.output.weight, w.output.bias);
    for (std::size_t c = 0; c < d; ++c) err = std::max(err, std::abs(got[i * d + c] - y[c]));
  }
  return err;
}

inline double deform_out(std::uint64_t seed = 6) { return deform_reference(1, seed); }
inline double multi_scale(std::uint64_t seed = 7) { return deform_reference(2, seed); }

// Random 6x4 cost against every injective assignment.
inline double hungarian(std::uint64_t seed = 8) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  CostMatrix c;
  c.queries = 6;
  c.targets = 4;
  oracle::Mat m(6, oracle::Vec(4));
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      m[i][j] = u(rng);
      c.values.push_back(m[i][j]);
    }
  const auto a = hungarian_match(c);
  double mine = 0;
  for (std::size_t j = 0; j < 4; ++j) mine += m[a.query_for_target[j]][j];
  return std::max(std::abs(mine - oracle::brute_force_assignment(m)), std::abs(mine - a.total_cost));
}

// Worst deviation of pose_to_image from commuting with random
// axis-aligned affine maps applied to the box corners.
inline double affine_equivariance(int trials = 1000, std::uint64_t seed = 10) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> s(0.2, 3.0), t(-0.5, 0.5);
  double worst = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    const Tensor k = random_keypoints(1, 5, rng);
    const double sx = s(rng), sy = s(rng), tx = t(rng), ty = t(rng);
    auto v = oracle::values_of(k);
    auto moved = v;
    for (int c = 0; c < 4; c += 2) {
      moved[c] = sx * v[c] + tx;
      moved[c + 1] = sy * v[c + 1] + ty;
    }
    const auto a = pose_to_image(make_keypoints(k, 5));
    const auto b = pose_to_image(make_keypoints(Tensor({1, 14}, moved), 5));
    for (std::size_t i = 0; i < 5; ++i) {
      worst = std::max(worst, std::abs(b[2 * i] - (sx * a[2 * i] + tx)));
      worst = std::max(worst, std::abs(b[2 * i + 1] - (sy * a[2 * i + 1] + ty)));
    }
  }
  return worst;
}

struct ExhaustiveResult {
  int trials = 0;
  int mismatches = 0;  // Hungarian cost above the brute-force optimum
  double worst_gap = 0.0;
};

// Random costs with G <= 5, Q <= 8 against permutation search.
inline ExhaustiveResult hungarian_exhaustive(int trials = 200, std::uint64_t seed = 11) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> gq(1, 8), gg(0, 5);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  ExhaustiveResult r;
  for (int trial = 0; trial < trials; ++trial) {
    const std::size_t q = gq(rng);
    const std::size_t g = std::min(q, gg(rng));
    oracle::Mat m(q, oracle::Vec(g));
    for (auto& row : m)
      for (auto& v : row) v = u(rng);
    CostMatrix c;
    c.queries = q;
    c.targets = g;
    for (const auto& row : m) c.values.insert(c.values.end(), row.begin(), row.end());
    const auto a = hungarian_match(c);
    std::vector<std::size_t> used = a.query_for_target;
    std::sort(used.begin(), used.end());
    const bool distinct = std::adjacent_find(used.begin(), used.end()) == used.end();
    double mine = 0;
    for (std::size_t j = 0; j < g; ++j) mine += m[a.query_for_target[j]][j];
    const double gap = mine - oracle::brute_force_assignment(m);
    r.worst_gap = std::max(r.worst_gap, gap);
    if (!distinct || gap > 1e-9) ++r.mismatches;
    ++r.trials;
  }
  return r;
}

// Hand-composed weighted sum of the four component oracles, G=2, Q=4.
inline double total(std::uint64_t seed = 9) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0), sc(0.2, 1.5);
  const std::size_t q = 4, g = 2, n = 5, mh = 3, mw = 3, layers = 2;
  std::vector<PredictionSet> preds(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    auto& p = preds[l];
    p.class_logits = random_tensor({q, 1}, rng);
    p.corners = random_tensor({q, 4}, rng, 0.3);
    std::vector<double> s(q * 4), ps(q * 2 * n);
    for (auto& x : s) x = sc(rng);
    for (auto& x : ps) x = sc(rng);
    p.box_scales = Tensor({q, 4}, s);
    p.pose = random_tensor({q, 2 * n}, rng, 0.3);
    p.pose_scales = Tensor({q, 2 * n}, ps);
    if (l + 1 == layers) {
      p.mask_logits = random_tensor({q, mh * mw}, rng, 2.0);
      p.mask_height = mh;
      p.mask_width = mw;
    }
  }
  SceneTargets t;
  t.mask_height = mh;
  t.mask_width = mw;
  for (std::size_t i = 0; i < g; ++i) {
    InstanceTarget it;
    it.box = {0.1 * i, 0.2, 0.5 + 0.1 * i, 0.9};
    for (std::size_t j = 0; j < n; ++j) {
      it.joints.push_back({u(rng), u(rng)});
      it.canonical.push_back({u(rng), u(rng)});
    }
    for (std::size_t k = 0; k < mh * mw; ++k) it.mask.push_back(u(rng) > 0.5 ? 1.0 : 0.0);
    t.instances.push_back(it);
  }
  Assignment a;
  a.query_for_target = {2, 0};
  const LossWeights wts;
  const auto report = total_loss(preds, t, a, wts, RegressionLoss::LaplaceNll, PoseSpace::Canonical);

  double want = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto& p = preds[l];
    double lc = 0;
    for (std::size_t i = 0; i < q; ++i) {
      const bool matched = i == 2 || i == 0;
      lc += oracle::bce(p.class_logits[i], matched ? 1.0 : 0.0);
    }
    lc /= q;
    double lb = 0, lp = 0;
    for (std::size_t j = 0; j < g; ++j) {
      const std::size_t qi = a.query_for_target[j];
      const auto& b = t.instances[j].box;
      const double tb[4] = {b.x0, b.y0, b.x1, b.y1};
      for (std::size_t k = 0; k < 4; ++k) lb += oracle::laplace_nll(p.corners[qi * 4 + k], p.box_scales[qi * 4 + k], tb[k]);
      for (std::size_t k = 0; k < n; ++k) {
        const auto& c = t.instances[j].canonical[k];
        lp += oracle::laplace_nll(p.pose[qi * 2 * n + 2 * k], p.pose_scales[qi * 2 * n + 2 * k], c.x);
        lp += oracle::laplace_nll(p.pose[qi * 2 * n + 2 * k + 1], p.pose_scales[qi * 2 * n + 2 * k + 1], c.y);
      }
    }
    lb /= g * 4.0;
    lp /= g * 2.0 * n;
    want += wts.cls * lc + wts.box * lb + wts.pose * lp;
    if (p.has_masks()) {
      double bce = 0, dice = 0;
      for (std::size_t j = 0; j < g; ++j) {
        const std::size_t qi = a.query_for_target[j];
        oracle::Vec prob;
        for (std::size_t k = 0; k < mh * mw; ++k) {
          const double x = p.mask_logits[qi * mh * mw + k];
          bce += oracle::bce(x, t.instances[j].mask[k]);
          prob.push_back(oracle::sigmoid(x));
        }
        dice += oracle::dice(prob, t.instances[j].mask);
      }
      want += wts.mask * (bce / (g * mh * mw) + dice / g);
    }
  }
  return std::abs(report.total_value - want);
}

// |L_total - sum over layers of lambda-weighted reported components|.
inline double total_is_weighted_sum(const LossReport& r) {
  double s = 0;
  for (const auto& l : r.layers) s += r.weights.cls * l.cls + r.weights.mask * l.mask + r.weights.box * l.box + r.weights.pose * l.pose;
  return std::abs(r.total_value - s);
}

}  // namespace checks
