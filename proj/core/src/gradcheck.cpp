#include "hcq/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "hcq/decoder.hpp"
#include "hcq/deform_attn.hpp"
#include "hcq/losses.hpp"
#include "hcq/model.hpp"
#include "hcq/ops.hpp"

namespace hcq {

namespace {

using Engine = std::mt19937_64;

Tensor randn(Shape shape, Engine& rng, double stddev = 1.0) {
  std::normal_distribution<double> d(0.0, stddev);
  std::vector<double> v(numel_of(shape));
  for (auto& x : v) x = d(rng);
  return Tensor(std::move(shape), std::move(v), true);
}

Tensor randu(Shape shape, double lo, double hi, Engine& rng) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(numel_of(shape));
  for (auto& x : v) x = d(rng);
  return Tensor(std::move(shape), std::move(v), true);
}

// Magnitude in [lo, hi] with random sign; keeps points off kinks at zero.
Tensor rand_away_from_zero(Shape shape, double lo, double hi, Engine& rng) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::bernoulli_distribution s(0.5);
  std::vector<double> v(numel_of(shape));
  for (auto& x : v) x = s(rng) ? d(rng) : -d(rng);
  return Tensor(std::move(shape), std::move(v), true);
}

Tensor constant(const Tensor& t) { return t.detach(); }

GradPoint unary(Tensor a, Tensor (*op)(const Tensor&)) {
  return {{a}, [a, op] { return op(a); }};
}

GradPoint binary(Tensor a, Tensor b, Tensor (*op)(const Tensor&, const Tensor&)) {
  return {{a, b}, [a, b, op] { return op(a, b); }};
}

void randomize(Linear& l, Engine& rng, double stddev) {
  std::normal_distribution<double> d(0.0, stddev);
  for (auto* t : {&l.weight, &l.bias}) {
    for (auto& v : t->mutable_data()) v = d(rng);
  }
}

void randomize(Mlp& m, Engine& rng, double stddev) {
  for (auto& l : m.layers) randomize(l, rng, stddev);
}

// Keypoints with corners well inside the clamp window and sorted.
Tensor rand_keypoints(std::size_t q, std::size_t n, Engine& rng) {
  std::uniform_real_distribution<double> lo(0.1, 0.4), ext(0.2, 0.5), pose(0.05, 0.95);
  std::vector<double> v(q * 2 * (n + 2));
  for (std::size_t i = 0; i < q; ++i) {
    double* r = v.data() + i * 2 * (n + 2);
    r[0] = lo(rng);
    r[1] = lo(rng);
    r[2] = r[0] + ext(rng);
    r[3] = r[1] + ext(rng);
    for (std::size_t j = 0; j < 2 * n; ++j) r[4 + j] = pose(rng);
  }
  return Tensor({q, 2 * (n + 2)}, std::move(v), true);
}

std::vector<Tensor> store_leaves(const ParameterStore& store) {
  auto t = store.tensors();
  return {t.begin(), t.end()};
}

}  // namespace

double relative_gradient_error(const GradPoint& point, const GradCheckOptions& options, Engine& rng,
                               bool* unstable) {
  auto& tape = Tape::active();
  tape.reset();
  for (auto leaf : point.leaves) {
    leaf.zero_grad();
    leaf.set_requires_grad(true);
  }
  const Tensor out = point.evaluate();
  Tensor weights;
  {
    std::normal_distribution<double> d(0.0, 1.0);
    std::vector<double> w(out.numel());
    for (auto& x : w) x = d(rng);
    weights = Tensor(out.shape(), std::move(w));
  }
  const Tensor loss = out.numel() == 1 ? out : sum(mul(out, weights));
  backward(loss);
  tape.reset();

  auto value = [&] {
    NoGradGuard guard;
    const Tensor o = point.evaluate();
    if (o.numel() == 1) return o.item();
    double s = 0.0;
    const auto od = o.data(), wd = weights.data();
    for (std::size_t i = 0; i < od.size(); ++i) s += od[i] * wd[i];
    return s;
  };
  auto central = [&](Tensor& leaf, std::size_t k, double h) {
    auto data = leaf.mutable_data();
    const double x = data[k];
    data[k] = x + h;
    const double fp = value();
    data[k] = x - h;
    const double fm = value();
    data[k] = x;
    return (fp - fm) / (2.0 * h);
  };

  if (unstable) *unstable = false;
  double worst = 0.0;
  std::size_t total = 0;
  for (const auto& l : point.leaves) total += l.numel();
  // A subset is drawn over the concatenation of all leaves.
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t i = 0; i < point.leaves.size(); ++i) {
    for (std::size_t k = 0; k < point.leaves[i].numel(); ++k) coords.emplace_back(i, k);
  }
  if (point.max_coords && point.max_coords < total) {
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(point.max_coords);
    std::sort(coords.begin(), coords.end());
  }
  std::size_t c = 0;
  for (std::size_t i = 0; i < point.leaves.size(); ++i) {
    Tensor leaf = point.leaves[i];
    const auto analytic = leaf.grad_or_zero();
    double diff = 0.0, amax = 0.0, nmax = 0.0;
    for (; c < coords.size() && coords[c].first == i; ++c) {
      const std::size_t k = coords[c].second;
      const double numeric = central(leaf, k, options.step);
      const double err = std::abs(analytic[k] - numeric);
      if (unstable && err > options.threshold * std::max(options.floor, std::abs(numeric))) {
        const double half = central(leaf, k, options.step / 2);
        if (std::abs(half - numeric) > 1e-3 * std::max(options.floor, std::abs(numeric))) *unstable = true;
      }
      diff = std::max(diff, err);
      nmax = std::max(nmax, std::abs(numeric));
      amax = std::max(amax, std::abs(analytic[k]));
    }
    worst = std::max(worst, diff / std::max({options.floor, amax, nmax}));
  }
  return worst;
}

GradCheckResult run_grad_case(const GradCase& c, const GradCheckOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  GradCheckResult r;
  r.name = c.name;
  Engine rng(options.seed ^ std::hash<std::string>{}(c.name));
  const std::size_t max_draws = options.points * 5;
  for (std::size_t draw = 0; r.points < options.points && draw < max_draws; ++draw) {
    const GradPoint p = c.draw(rng);
    bool unstable = false;
    const double e = relative_gradient_error(p, options, rng, c.piecewise ? &unstable : nullptr);
    if (unstable) {
      ++r.redrawn;
      continue;
    }
    r.max_relative_error = std::max(r.max_relative_error, e);
    ++r.points;
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::vector<GradCase> standard_grad_cases() {
  std::vector<GradCase> cs;
  auto add_case = [&](std::string name, bool piecewise, std::function<GradPoint(Engine&)> draw) {
    cs.push_back({std::move(name), piecewise, std::move(draw)});
  };

  add_case("add", false, [](Engine& r) { return binary(randn({3, 4}, r), randn({4}, r), add); });
  add_case("sub", false, [](Engine& r) { return binary(randn({2, 3, 4}, r), randn({3, 1}, r), sub); });
  add_case("mul", false, [](Engine& r) { return binary(randn({3, 4}, r), randn({3, 4}, r), mul); });
  add_case("div", false, [](Engine& r) { return binary(randn({3, 4}, r), rand_away_from_zero({1, 4}, 0.5, 2.0, r), div); });
  add_case("minimum", true, [](Engine& r) { return binary(randn({3, 4}, r), randn({3, 4}, r), minimum); });
  add_case("maximum", true, [](Engine& r) { return binary(randn({3, 4}, r), randn({3, 4}, r), maximum); });
  add_case("neg", false, [](Engine& r) { return unary(randn({3, 4}, r), neg); });
  add_case("relu", true, [](Engine& r) { return unary(rand_away_from_zero({3, 4}, 1e-3, 2.0, r), relu); });
  add_case("sigmoid", false, [](Engine& r) { return unary(randn({3, 4}, r, 2.0), sigmoid); });
  add_case("exp", false, [](Engine& r) { return unary(randn({3, 4}, r), exp); });
  add_case("log", false, [](Engine& r) { return unary(randu({3, 4}, 0.2, 3.0, r), log); });
  add_case("softplus", false, [](Engine& r) { return unary(randn({3, 4}, r, 3.0), softplus); });
  add_case("abs", true, [](Engine& r) { return unary(rand_away_from_zero({3, 4}, 1e-3, 2.0, r), abs); });
  add_case("scale", false, [](Engine& r) {
    Tensor a = randn({5}, r);
    return GradPoint{{a}, [a] { return scale(a, -1.7); }};
  });
  add_case("add_scalar", false, [](Engine& r) {
    Tensor a = randn({5}, r);
    return GradPoint{{a}, [a] { return add_scalar(a, 0.3); }};
  });
  add_case("clamp", true, [](Engine& r) {
    Tensor a = randn({4, 4}, r);
    return GradPoint{{a}, [a] { return clamp(a, -0.5, 0.5); }};
  });
  add_case("inverse_sigmoid", false, [](Engine& r) {
    Tensor a = randu({3, 4}, 0.05, 0.95, r);
    return GradPoint{{a}, [a] { return inverse_sigmoid(a); }};
  });
  add_case("matmul", false, [](Engine& r) { return binary(randn({3, 5}, r), randn({5, 2}, r), matmul); });
  add_case("bmm", false, [](Engine& r) { return binary(randn({2, 3, 4}, r), randn({2, 4, 3}, r), bmm); });
  add_case("transpose", false, [](Engine& r) { return unary(randn({3, 5}, r), transpose); });
  add_case("reshape", false, [](Engine& r) {
    Tensor a = randn({3, 4}, r);
    return GradPoint{{a}, [a] { return reshape(a, {2, 6}); }};
  });
  add_case("slice", false, [](Engine& r) {
    Tensor a = randn({4, 5, 2}, r);
    return GradPoint{{a}, [a] { return slice(a, 1, 1, 4); }};
  });
  add_case("concat", false, [](Engine& r) {
    Tensor a = randn({3, 2}, r), b = randn({3, 4}, r);
    return GradPoint{{a, b}, [a, b] { return concat({a, b, a}, 1); }};
  });
  add_case("index_select", false, [](Engine& r) {
    Tensor a = randn({4, 3}, r);
    return GradPoint{{a}, [a] { return index_select(a, 0, {3, 0, 3, 1}); }};
  });
  add_case("sum", false, [](Engine& r) { return unary(randn({3, 4}, r), sum); });
  add_case("mean", false, [](Engine& r) { return unary(randn({3, 4}, r), mean); });
  add_case("sum_last", false, [](Engine& r) { return unary(randn({2, 3, 4}, r), sum_last); });
  add_case("softmax", false, [](Engine& r) {
    Tensor a = randn({3, 5}, r, 2.0);
    return GradPoint{{a}, [a] { return softmax(a, 1); }};
  });
  add_case("softmax_axis0", false, [](Engine& r) {
    Tensor a = randn({4, 3}, r, 2.0);
    return GradPoint{{a}, [a] { return softmax(a, 0); }};
  });
  add_case("layer_norm", false, [](Engine& r) {
    Tensor x = randn({3, 6}, r), g = randn({6}, r), b = randn({6}, r);
    return GradPoint{{x, g, b}, [x, g, b] { return layer_norm(x, g, b); }};
  });
  add_case("bilinear_sample", true, [](Engine& r) {
    // Includes locations past the border to exercise zero padding.
    Tensor f = randn({4, 5, 3}, r), loc = randu({6, 2}, -0.1, 1.1, r);
    return GradPoint{{f, loc}, [f, loc] { return bilinear_sample(f, loc); }};
  });
  add_case("im2col", false, [](Engine& r) {
    Tensor a = randn({6, 6, 2}, r);
    return GradPoint{{a}, [a] { return im2col(a, 2, 2); }};
  });
  add_case("sine_encode", false, [](Engine& r) {
    Tensor a = randu({3, 4}, -0.2, 1.2, r);
    return GradPoint{{a}, [a] { return sine_encode(a, 8); }};
  });

  add_case("pose_to_image", false, [](Engine& r) {
    Tensor k = rand_keypoints(3, 5, r);
    return GradPoint{{k}, [k] { return pose_to_image(make_keypoints(k, 5)); }};
  });
  add_case("bbox_center_extent", false, [](Engine& r) {
    Tensor k = rand_keypoints(3, 5, r);
    return GradPoint{{k}, [k] {
      const auto parts = bbox_center_extent(make_keypoints(k, 5));
      return concat({parts.centers, parts.extents}, 1);
    }};
  });
  add_case("refine", true, [](Engine& r) {
    Tensor k = rand_keypoints(3, 5, r), bd = randn({3, 4}, r, 0.1), pd = randn({3, 10}, r, 0.05);
    return GradPoint{{k, bd, pd}, [k, bd, pd] { return refine(make_keypoints(k, 5), bd, pd).coords; }};
  });
  add_case("structural_embedding", true, [](Engine& r) {
    ParameterStore store;
    Engine init(r());
    auto mlp = std::make_shared<Mlp>(store, "mlp", 14 * 4, 16, 8, 3, init);
    randomize(*mlp, r, 0.3);
    Tensor k = rand_keypoints(2, 5, r);
    auto leaves = store_leaves(store);
    leaves.push_back(k);
    return GradPoint{leaves, [k, mlp] { return structural_embedding(make_keypoints(k, 5), *mlp, 4); }};
  });
  add_case("self_attention", false, [](Engine& r) {
    ParameterStore store;
    Engine init(r());
    auto w = std::make_shared<std::vector<Linear>>();
    for (const char* n : {"q", "k", "v", "o"}) w->emplace_back(store, n, 8, 8, init);
    for (auto& l : *w) randomize(l, r, 0.4);
    Tensor qk = randn({4, 8}, r), v = randn({4, 8}, r);
    auto leaves = store_leaves(store);
    leaves.push_back(qk);
    leaves.push_back(v);
    return GradPoint{leaves, [qk, v, w] {
      return multi_head_self_attention(qk, v, (*w)[0], (*w)[1], (*w)[2], (*w)[3], 2);
    }};
  });
  add_case("deform_attn_keypoints", true, [](Engine& r) {
    ParameterStore store;
    Engine init(r());
    const SamplingConfig sc{2, 8, 4};
    auto w = std::make_shared<DeformAttnWeights>(store, "da", 8, sc, 2, init);
    for (auto* l : {&w->offsets, &w->attention, &w->value, &w->output}) randomize(*l, r, 0.3);
    auto f0 = randn({2, 2, 8}, r), f1 = randn({4, 4, 8}, r);
    Tensor query = randn({3, 8}, r);
    Tensor k = rand_keypoints(3, 5, r);
    auto leaves = store_leaves(store);
    for (const auto& t : {f0, f1, query, k}) leaves.push_back(t);
    return GradPoint{leaves, [=] {
      const FeaturePyramid pyr{{f0, f1}};
      const auto kp = make_keypoints(k, 5);
      const auto plan = build_sampling_plan(kp, PoseSpace::Canonical, query, w->offsets, sc);
      return deform_attn_keypoints(query, pyr, plan, *w).output;
    }};
  });

  add_case("bce_loss", false, [](Engine& r) {
    Tensor x = randn({3, 5}, r, 2.0), t = constant(randu({3, 5}, 0.0, 1.0, r));
    return GradPoint{{x}, [x, t] { return bce_loss(x, t); }};
  });
  add_case("dice_loss", false, [](Engine& r) {
    Tensor p = randu({3, 5}, 0.05, 0.95, r), t = constant(randu({3, 5}, 0.0, 1.0, r));
    return GradPoint{{p}, [p, t] { return dice_loss(p, t); }};
  });
  add_case("dice_loss_rows", false, [](Engine& r) {
    Tensor p = randu({3, 5}, 0.05, 0.95, r), t = constant(randu({3, 5}, 0.0, 1.0, r));
    return GradPoint{{p}, [p, t] { return dice_loss_rows(p, t); }};
  });
  add_case("regression_nll", true, [](Engine& r) {
    Tensor p = randn({3, 4}, r), s = randu({3, 4}, 0.2, 2.0, r), t = constant(randn({3, 4}, r));
    return GradPoint{{p, s}, [p, s, t] { return regression_nll(p, s, t); }};
  });
  add_case("l1_loss", true, [](Engine& r) {
    Tensor p = randn({3, 4}, r), t = constant(randn({3, 4}, r));
    return GradPoint{{p}, [p, t] { return l1_loss(p, t); }};
  });

  add_case("model_total_loss", true, [](Engine& r) {
    DecoderConfig dc;
    dc.num_queries = 4;
    dc.num_layers = 2;
    dc.hidden = 16;
    dc.heads = 2;
    dc.points_per_query = 8;
    dc.keypoint_quota = 4;
    dc.ffn_dim = 16;
    auto model = std::make_shared<HcqModel>(dc, r());
    // Zero-initialized layers would hide their input gradients.
    auto& store = model->parameters();
    std::normal_distribution<double> d(0.0, 0.05);
    for (std::size_t i = 0; i < store.size(); ++i) {
      auto t = store.tensor(i);
      for (auto& v : t.mutable_data()) v += d(r);
    }
    SceneConfig sc;
    sc.image_size = 32;
    sc.min_instances = 1;
    sc.max_instances = 2;
    sc.min_figure = 0.5;
    sc.max_figure = 0.8;
    sc.thickness = 2.0;
    auto sample = std::make_shared<SceneSample>(generate_scene(r(), sc));
    auto targets = std::make_shared<SceneTargets>(make_targets(*sample, 8));
    Assignment assignment;
    {
      NoGradGuard guard;
      const auto out = model->forward(image_tensor(*sample));
      assignment = hungarian_match(matching_cost(out.predictions.back(), *targets, {}));
    }
    GradPoint p{store_leaves(store), [model, sample, targets, assignment] {
                  const auto out = model->forward(image_tensor(*sample));
                  return total_loss(out.predictions, *targets, assignment, {}, RegressionLoss::LaplaceNll,
                                    PoseSpace::Canonical)
                      .total;
                }};
    p.max_coords = 40;
    return p;
  });
  return cs;
}

std::vector<GradCheckResult> grad_check_sweep(const GradCheckOptions& options) {
  std::vector<GradCheckResult> out;
  for (const auto& c : standard_grad_cases()) out.push_back(run_grad_case(c, options));
  return out;
}

}  // namespace hcq
