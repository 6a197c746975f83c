#include <benchmark/benchmark.h>

#include "motionseg/corruption.hpp"
#include "motionseg/maskmetrics.hpp"
#include "motionseg/nets.hpp"
#include "motionseg/scenes.hpp"

using namespace mseg;

namespace {

BinaryMask random_mask(int size, double p, uint64_t seed) {
  RandomStream rng(seed);
  BinaryMask m(size, size);
  for (auto& v : m.data) v = rng.bernoulli(p);
  return m;
}

void BM_LocalIoU(benchmark::State& state) {
  const int size = int(state.range(0));
  const int win = int(state.range(1));
  const BinaryMask a = random_mask(size, 0.3, 1);
  const BinaryMask b = random_mask(size, 0.3, 2);
  for (auto _ : state) benchmark::DoNotOptimize(local_iou(a, b, win, win));
}
BENCHMARK(BM_LocalIoU)->Args({64, 16})->Args({64, 1})->Args({256, 16});

void BM_MorphErode(benchmark::State& state) {
  const BinaryMask m = random_mask(64, 0.3, 3);
  const int radius = int(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(morph(m, radius, MorphMode::erode));
}
BENCHMARK(BM_MorphErode)->Arg(1)->Arg(3)->Arg(8);

void BM_ConnectedComponents(benchmark::State& state) {
  const BinaryMask m = random_mask(int(state.range(0)), 0.4, 4);
  for (auto _ : state) benchmark::DoNotOptimize(connected_components(m));
}
BENCHMARK(BM_ConnectedComponents)->Arg(64)->Arg(256);

void BM_SegmenterForward(benchmark::State& state) {
  const int base = int(state.range(0));
  Segmenter net(default_arch(Role::proxy, 64, base), 1);
  RandomStream rng(5);
  Tensor x(1, 64, 64);
  for (auto& v : x.v) v = rng.uniform(0, 1);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
}
BENCHMARK(BM_SegmenterForward)->Arg(4)->Arg(8)->Arg(16);

void BM_SegmenterForwardBackward(benchmark::State& state) {
  Segmenter net(default_arch(Role::proxy, 64, int(state.range(0))), 1);
  RandomStream rng(6);
  Tensor x(1, 64, 64), g(1, 64, 64);
  for (auto& v : x.v) v = rng.uniform(0, 1);
  for (auto& v : g.v) v = rng.uniform(-1, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(net.forward(x));
    benchmark::DoNotOptimize(net.backward(g));
  }
}
BENCHMARK(BM_SegmenterForwardBackward)->Arg(4)->Arg(8)->Arg(16);

void BM_ScenePair(benchmark::State& state) {
  SceneConfig sc;
  sc.seed = 7;
  int i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(gen_scene_pair(sc, i++));
}
BENCHMARK(BM_ScenePair);

}  // namespace

BENCHMARK_MAIN();
