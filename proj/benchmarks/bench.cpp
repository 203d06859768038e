#include <benchmark/benchmark.h>

#include <random>

#include "lrfit/fitting.hpp"
#include "lrfit/lr_surface.hpp"
#include "test_util.hpp"

using namespace lrfit;

namespace {

LRSurface refinedSurface(int insertions) {
  std::mt19937 rng(7);
  LRSurface s = LRSurface::fromTensorProduct(testutil::randomTPSurface(rng, 12, 12, 2));
  for (int i = 0; i < insertions; ++i) {
    try {
      s.insertMeshline(testutil::randomMeshline(rng, s));
    } catch (const std::invalid_argument&) {
    }
  }
  return s;
}

void BM_Evaluate(benchmark::State& state) {
  LRSurface s = refinedSurface(static_cast<int>(state.range(0)));
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> d(0.0, 10.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(s.evaluate(d(rng), d(rng)));
  }
}
BENCHMARK(BM_Evaluate)->Arg(0)->Arg(40)->Arg(160);

void BM_InsertMeshline(benchmark::State& state) {
  for (auto _ : state) {
    state.PauseTiming();
    std::mt19937 rng(13);
    LRSurface s = LRSurface::fromTensorProduct(testutil::randomTPSurface(rng, 12, 12, 2));
    std::vector<Meshline> lines;
    for (int i = 0; i < 30; ++i) lines.push_back(testutil::randomMeshline(rng, s));
    state.ResumeTiming();
    for (const auto& m : lines) {
      try {
        s.insertMeshline(m);
      } catch (const std::invalid_argument&) {
      }
    }
  }
}
BENCHMARK(BM_InsertMeshline)->Unit(benchmark::kMillisecond);

void BM_LeastSquaresFit(benchmark::State& state) {
  std::mt19937 rng(17);
  PointCloud cloud = testutil::gaussianBumpCloud(
      rng, static_cast<size_t>(state.range(0)),
      {{3.0, 3.0, 2.0, 1.5}, {7.0, 7.0, -1.0, 2.0}}, 0.0, 10.0);
  FitConfig cfg;
  for (auto _ : state) {
    LRSurface s = initialFit(cloud, cfg);
    benchmark::DoNotOptimize(s.numBSplines());
  }
}
BENCHMARK(BM_LeastSquaresFit)->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);

void BM_MbaPass(benchmark::State& state) {
  std::mt19937 rng(19);
  LRSurface s = refinedSurface(40);
  for (int id : s.bsplineIds()) s.setCoef(id, 0.0);
  PointCloud cloud = testutil::gaussianBumpCloud(
      rng, 50000, {{3.0, 3.0, 2.0, 1.5}, {7.0, 7.0, -1.0, 2.0}}, 0.0, 10.0);
  FitConfig cfg;
  for (auto _ : state) mbaUpdate(s, cloud, cfg);
}
BENCHMARK(BM_MbaPass)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
