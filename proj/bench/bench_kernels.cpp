// Serial reference kernels vs the OpenMP versions. Arg is the thread count
// for the parallel runs; the image side is fixed at 512.

#include <benchmark/benchmark.h>

#include <random>

#include "foodfuse/fusion.hpp"
#include "foodfuse/metrics.hpp"
#include "foodfuse/reference.hpp"

using namespace foodfuse;

namespace {

constexpr int kSide = 512;

LabelMap random_map(std::uint32_t seed) {
  LabelMap m({kSide, kSide});
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> cls(0, 103);
  for (auto& v : m.data()) v = static_cast<std::uint8_t>(cls(rng));
  return m;
}

// 80 rectangular proposals of assorted sizes, like a top-k selection.
const MaskSet& masks() {
  static const MaskSet set = [] {
    MaskSet s;
    s.dims = {kSide, kSide};
    std::mt19937 rng(5);
    std::uniform_int_distribution<int> pos(0, kSide - 1);
    for (int i = 0; i < 80; ++i) {
      int x0 = pos(rng), x1 = pos(rng), y0 = pos(rng), y1 = pos(rng);
      if (x0 > x1) std::swap(x0, x1);
      if (y0 > y1) std::swap(y0, y1);
      BinaryMask m(s.dims);
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) m(x, y) = 1;
      s.records.push_back(MaskRecord::from_pixels(i, std::move(m)));
    }
    return s;
  }();
  return set;
}

void BM_VoteSerial(benchmark::State& state) {
  const auto sem = random_map(1);
  for (auto _ : state) benchmark::DoNotOptimize(reference::vote_masks(masks(), sem));
}

void BM_VoteParallel(benchmark::State& state) {
  const auto sem = random_map(1);
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(vote_masks(masks(), sem, threads));
}

void BM_ConfusionSerial(benchmark::State& state) {
  const auto pred = random_map(2), gt = random_map(3);
  for (auto _ : state) benchmark::DoNotOptimize(reference::confusion_matrix(pred, gt, 104));
}

void BM_ConfusionParallel(benchmark::State& state) {
  const auto pred = random_map(2), gt = random_map(3);
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(confusion_matrix(pred, gt, 104, {}, threads));
}

}  // namespace

BENCHMARK(BM_VoteSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_VoteParallel)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConfusionSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConfusionParallel)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
