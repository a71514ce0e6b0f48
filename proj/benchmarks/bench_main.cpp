#include <benchmark/benchmark.h>

#include <random>

#include "domaingcn/audit.hpp"
#include "domaingcn/dataset.hpp"
#include "domaingcn/metrics.hpp"
#include "domaingcn/runtime.hpp"
#include "domaingcn/training.hpp"

using namespace domaingcn;

namespace {

WsiGraph SlideGraph(int nodes, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.n_wsis = 1;
  spec.positive_frac = 1.0;
  spec.min_nodes = nodes;
  spec.max_nodes = nodes;
  spec.seed = seed;
  const SyntheticWsi w = GenerateCohort(spec).front();
  return GraphFromRecords(w.wsi_id, w.label, w.records, HyperParams{}, WeightRule{});
}

void BM_KnnEdges(benchmark::State& state) {
  const WsiGraph g = SlideGraph(static_cast<int>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(KnnEdges(g.coords, 8));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_KnnEdges)->RangeMultiplier(2)->Range(64, 1024)->Complexity();

void BM_Predict(benchmark::State& state) {
  const WsiGraph g = SlideGraph(static_cast<int>(state.range(0)), 2);
  const PreparedGraph pg(g);
  const HyperParams h;
  const ModelParams p = InitParams(h, 3);
  for (auto _ : state) benchmark::DoNotOptimize(Predict(pg, p, h).loss);
}
BENCHMARK(BM_Predict)->Arg(100)->Arg(275)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_LossAndGrad(benchmark::State& state) {
  const WsiGraph g = SlideGraph(static_cast<int>(state.range(0)), 2);
  const PreparedGraph pg(g);
  const HyperParams h;
  const ModelParams p = InitParams(h, 3);
  for (auto _ : state) benchmark::DoNotOptimize(ComputeLossAndGrad(pg, p, h).loss);
}
BENCHMARK(BM_LossAndGrad)->Arg(100)->Arg(275)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_AdamStep(benchmark::State& state) {
  const HyperParams h;
  ModelParams p = InitParams(h, 4);
  const ModelParams g = InitParams(h, 5);
  AdamState s = AdamState::For(p);
  const TrainConfig c;
  for (auto _ : state) AdamStep(p, g, s, c);
}
BENCHMARK(BM_AdamStep)->Unit(benchmark::kMicrosecond);

void BM_Auc(benchmark::State& state) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> s(n);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = u(rng);
    y[i] = static_cast<int>(i % 2);
  }
  for (auto _ : state) benchmark::DoNotOptimize(Auc(s, y));
}
BENCHMARK(BM_Auc)->Arg(61)->Arg(10000);

void BM_GenerateWsi(benchmark::State& state) {
  SyntheticSpec spec;
  spec.min_nodes = 275;
  spec.max_nodes = 275;
  const auto u = SignalDirection(spec.seed);
  int i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(GenerateWsi(spec, i++, 1, u).records.size());
}
BENCHMARK(BM_GenerateWsi)->Unit(benchmark::kMillisecond);

void BM_GradientAuditSmall(benchmark::State& state) {
  HyperParams h;
  h.hidden = 16;
  h.pe_dim = 8;
  h.layers = 2;
  const AuditPoint point = DrawAuditPoint(0, h, 10, 8);
  for (auto _ : state) {
    benchmark::DoNotOptimize(AuditModelGradients(point.graph, point.params, h).max_relative_error);
  }
}
BENCHMARK(BM_GradientAuditSmall)->Unit(benchmark::kMillisecond);

}  // namespace
int main(int argc, char** argv) {
  TuneAllocatorForTraining();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
