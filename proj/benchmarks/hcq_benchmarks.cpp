#include <benchmark/benchmark.h>

#include <random>

#include "hcq/deform_attn.hpp"
#include "hcq/matching.hpp"
#include "hcq/ops.hpp"
#include "hcq/trainer.hpp"

using namespace hcq;

namespace {

Tensor randn(Shape shape, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  std::vector<double> v(numel_of(shape));
  for (auto& x : v) x = d(rng);
  return Tensor(std::move(shape), std::move(v));
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  const Tensor a = randn({n, n}, rng), b = randn({n, n}, rng);
  NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256);

void BM_BilinearSample(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Tensor fmap = randn({16, 16, 64}, rng);
  std::vector<double> loc(2 * 640);
  for (auto& x : loc) x = u(rng);
  const Tensor locations({640, 2}, loc);
  NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(bilinear_sample(fmap, locations));
}
BENCHMARK(BM_BilinearSample);

void BM_Hungarian(benchmark::State& state) {
  const auto q = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::vector<double> v(q * 4);
  for (auto& x : v) x = u(rng);
  const CostMatrix c(q, 4, v);
  for (auto _ : state) benchmark::DoNotOptimize(hungarian_match(c));
}
BENCHMARK(BM_Hungarian)->Arg(20)->Arg(100);

void BM_ModelForward(benchmark::State& state) {
  const RunConfig cfg;
  HcqModel model(cfg.decoder, cfg.seed);
  const Tensor image = image_tensor(generate_scene(1, cfg.dataset.scene));
  NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(image));
}
BENCHMARK(BM_ModelForward)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  RunConfig cfg;
  cfg.optim.batch_size = 1;
  Trainer trainer(cfg, training_scenes(cfg));
  for (auto _ : state) benchmark::DoNotOptimize(trainer.step());
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
