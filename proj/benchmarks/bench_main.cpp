#include <benchmark/benchmark.h>

#include <random>

#include "dixon/eval/inference.hpp"
#include "dixon/eval/metrics.hpp"
#include "dixon/nn/conv.hpp"
#include "dixon/nn/ops.hpp"
#include "dixon/tiling.hpp"
#include "dixon/train/trainer.hpp"

namespace {

using dixon::Index3;
using dixon::Volume;
namespace nn = dixon::nn;

nn::Tensor<float> noise(std::vector<int> shape, std::uint64_t seed) {
  nn::Tensor<float> t(std::move(shape));
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0F, 1.0F);
  for (float& v : t.values()) v = n(rng);
  return t;
}

Volume noise_volume(Index3 dims, std::uint64_t seed) {
  Volume v(dims, {1, 1, 1});
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& x : v.data()) x = u(rng);
  return v;
}

void BM_Conv3dForwardBackward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto x = nn::Var<float>::parameter(noise({2, 8, n, n, n}, 1));
  nn::ConvParams<float> p{nn::Var<float>::parameter(noise({16, 8, 4, 4, 4}, 2)),
                          nn::Var<float>::parameter(nn::Tensor<float>({16})), 2, 1};
  for (auto _ : state) {
    x.zero_grad();
    p.weight.zero_grad();
    p.bias.zero_grad();
    nn::backward(nn::sum(nn::conv3d(x, p)));
    benchmark::DoNotOptimize(p.weight.grad().values().data());
  }
  state.SetItemsProcessed(state.iterations() * 2LL * 8 * n * n * n);
}
BENCHMARK(BM_Conv3dForwardBackward)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Ssim(benchmark::State& state) {
  const Index3 d = Index3::cube(static_cast<int>(state.range(0)));
  const Volume a = noise_volume(d, 3);
  const Volume b = noise_volume(d, 4);
  for (auto _ : state) benchmark::DoNotOptimize(dixon::eval::ssim(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(a.size()));
}
BENCHMARK(BM_Ssim)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_TileRoundTrip(benchmark::State& state) {
  const Volume v = noise_volume({64, 64, 96}, 5);
  const dixon::TileLayout layout = dixon::plan_tiles(v.dims(), {24, 24, 24});
  for (auto _ : state) benchmark::DoNotOptimize(dixon::reassemble(layout, dixon::crop_tiles(v, layout)).data().data());
}
BENCHMARK(BM_TileRoundTrip)->Unit(benchmark::kMillisecond);

void BM_GeneratorTrainStep(benchmark::State& state) {
  dixon::train::TrainingCorpus corpus;
  dixon::train::Subject s;
  s.id = "bench";
  s.data.study.ip = noise_volume(Index3::cube(32), 6);
  s.data.study.op = noise_volume(Index3::cube(32), 7);
  s.data.study.fat = noise_volume(Index3::cube(32), 8);
  s.data.study.water = noise_volume(Index3::cube(32), 9);
  corpus.subjects.push_back(std::move(s));
  dixon::model::ModelConfig cfg;
  cfg.generator.levels = 3;
  cfg.generator.filters = {8, 16, 32};
  cfg.generator.crop_size = Index3::cube(16);
  cfg.discriminator.filters = {8, 16};
  dixon::train::GanModels m(cfg, 1, 1e-3);
  std::mt19937_64 rng(10);
  for (auto _ : state) {
    const auto b = dixon::train::sample_batch(corpus, {0}, Index3::cube(16), 2, dixon::model::InputMode::DualIpOp,
                                              true, rng);
    benchmark::DoNotOptimize(dixon::train::train_step(m, b, nullptr).total_g);
  }
}
BENCHMARK(BM_GeneratorTrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
