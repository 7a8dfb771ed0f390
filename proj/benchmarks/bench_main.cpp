#include <benchmark/benchmark.h>

#include <filesystem>
#include <random>

#include "paradram/chain.hpp"
#include "paradram/kernel.hpp"
#include "paradram/model.hpp"
#include "paradram/parallel.hpp"
#include "paradram/persist.hpp"
#include "paradram/proposal.hpp"
#include "paradram/random.hpp"
#include "paradram/refine.hpp"

namespace {

using namespace paradram;

TargetDensity mvn(int d) {
  BuiltinTargetSpec spec;
  spec.dimension = d;
  return make_builtin_target(spec);
}

void BM_LogDensity(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const auto target = mvn(d);
  const Point x = Point::Constant(d, 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(target(x));
}
BENCHMARK(BM_LogDensity)->Arg(2)->Arg(10)->Arg(50);

void BM_AttemptStep(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const int dr = static_cast<int>(state.range(1));
  const auto target = mvn(d);
  const auto proposal = ProposalState::initial(d, dr);
  const Point x = Point::Zero(d);
  const double logX = target(x);
  auto stream = RandomStream::for_chain(1, 0);
  for (auto _ : state) benchmark::DoNotOptimize(attempt_step(target, proposal, x, logX, stream));
}
BENCHMARK(BM_AttemptStep)->Args({2, 0})->Args({2, 1})->Args({10, 1})->Args({50, 1});

void BM_RunKernel(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const auto target = mvn(d);
  KernelConfig k;
  k.chainLengthTarget = 10000;
  k.adaptationPeriod = KernelConfig::default_adaptation_period(d);
  k.startPoint = Point::Zero(d);
  const auto proposal = ProposalState::initial(d, k.drStageCount);
  for (auto _ : state) {
    MemorySink sink(d);
    benchmark::DoNotOptimize(run_kernel(target, k, proposal, RandomStream::for_chain(2, 0), sink));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(k.chainLengthTarget));
}
BENCHMARK(BM_RunKernel)->Arg(2)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_EstimateIac(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  std::vector<double> series(n);
  double x = 0.0;
  for (auto& v : series) v = x = 0.9 * x + z(rng);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_iac(series));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_EstimateIac)->Arg(10000)->Arg(1000000);

void BM_ForkJoinRound(benchmark::State& state) {
  const auto workers = static_cast<std::uint32_t>(state.range(0));
  const auto target = mvn(4);
  const auto proposal = ProposalState::initial(4, 1);
  const Point x = Point::Zero(4);
  const double logX = target(x);
  ForkJoinRounds rounds(4, workers);
  std::uint64_t round = 0;
  for (auto _ : state) benchmark::DoNotOptimize(rounds.run_round(target, proposal, x, logX, ++round));
}
BENCHMARK(BM_ForkJoinRound)->Arg(1)->Arg(8)->Arg(64);

void BM_ChainWriter(benchmark::State& state) {
  const auto format = state.range(0) ? ChainFormat::Binary : ChainFormat::Ascii;
  const auto path = std::filesystem::temp_directory_path() / "paradram_bench_chain";
  ChainRow row;
  row.state = Point::Constant(4, 0.123456789);
  row.logFunc = -3.25;
  ChainWriter writer(path, format, ',', std::vector<std::string>{"x1", "x2", "x3", "x4"});
  for (auto _ : state) writer.write(row);
  writer.flush();
  state.SetBytesProcessed(static_cast<std::int64_t>(writer.bytes_written()));
  std::filesystem::remove(path);
}
BENCHMARK(BM_ChainWriter)->Arg(0)->Arg(1);

}  // namespace

BENCHMARK_MAIN();
