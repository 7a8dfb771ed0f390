#include <doctest.h>

#include <atomic>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "paradram/parallel.hpp"

using namespace paradram;

TEST_CASE("predicted speedup") {
  CHECK(predict_speedup(0.3, 1) == 1.0);
  CHECK(predict_speedup(0.5, 2) == doctest::Approx(1.5));
  CHECK(predict_speedup(0.5, 4) == doctest::Approx(1.875));
  CHECK(predict_speedup(0.5, 8) == doctest::Approx(1.9921875));
  CHECK(predict_speedup(0.5, 4096) == doctest::Approx(2.0));
  CHECK(predict_speedup(1e-9, 64) == doctest::Approx(64.0).epsilon(1e-6));
  for (double p : {0.01, 0.1, 0.5, 0.9}) {
    double prev = 0.0, prevGain = 1e300;
    for (std::uint64_t P = 1; P <= 256; ++P) {
      const double s = predict_speedup(p, P);
      CHECK(s >= prev);
      CHECK(s <= 1.0 / p + 1e-12);
      CHECK(s - prev <= prevGain + 1e-12);
      prevGain = s - prev;
      prev = s;
    }
  }
}

TEST_CASE("predicted speedup matches simulated rounds") {
  // P=2, p=0.5: accepted states per round over p
  const auto committed = oracle::simulate_committing_rounds(0.5, 2, 200000, 1);
  CHECK(double(committed) / 200000.0 / 0.5 == doctest::Approx(predict_speedup(0.5, 2)).epsilon(0.01));
}

TEST_CASE("recommended workers") {
  CHECK(recommend_workers(1.0) == 1);
  CHECK(recommend_workers(0.5) == 5);
  CHECK(recommend_workers(0.1) == 29);
  CHECK(recommend_workers(1e-9) == 65536);
}

TEST_CASE("geometric fit") {
  ContributionTally all{4, {100, 0, 0, 0}};
  const auto d = fit_geometric(all);
  CHECK(d.p == 1.0);
  CHECK(d.degenerate);

  ContributionTally small{2, {2, 1}};
  const double p = fit_geometric(small).p;
  CHECK(p == doctest::Approx(0.5).epsilon(1e-9));
  // grid search of the truncated log-likelihood as an independent check
  double best = 0.0, bestLl = -1e300;
  for (int i = 1; i < 100000; ++i) {
    const double q = i / 100000.0;
    const auto pmf = oracle::truncated_geometric(q, 2);
    const double ll = 2.0 * std::log(pmf[0]) + std::log(pmf[1]);
    if (ll > bestLl) bestLl = ll, best = q;
  }
  CHECK(p == doctest::Approx(best).epsilon(1e-4));

  std::mt19937_64 rng(31);
  const auto pmf = oracle::truncated_geometric(0.25, 32);
  std::discrete_distribution<int> rank(pmf.begin(), pmf.end());
  ContributionTally synth{32, std::vector<std::uint64_t>(32, 0)};
  for (int i = 0; i < 100000; ++i) ++synth.counts[static_cast<std::size_t>(rank(rng))];
  CHECK(std::abs(fit_geometric(synth).p - 0.25) <= 0.01);
}

TEST_CASE("speedup report") {
  const auto r = make_speedup_report(0.5, 8);
  REQUIRE(r.predictedCurve.size() == 4);
  CHECK(r.predictedCurve[0].first == 1);
  CHECK(r.predictedCurve[0].second == 1.0);
  CHECK(r.predictedCurve[3].first == 8);
  CHECK(r.recommendedP == 5);
}

TEST_CASE("worker pool covers every index once and propagates errors") {
  WorkerPool pool(4);
  std::vector<std::atomic<int>> hits(1000);
  pool.run(hits.size(), [&](std::size_t i) { ++hits[i]; });
  pool.run(hits.size(), [&](std::size_t i) { ++hits[i]; });
  for (auto& h : hits) CHECK(h.load() == 2);
  CHECK_THROWS_AS(pool.run(10, [](std::size_t i) { if (i == 7) throw std::runtime_error("x"); }),
                  std::runtime_error);
  pool.run(3, [](std::size_t) {});
}

namespace {

TargetDensity himmelblau_target() {
  BuiltinTargetSpec s;
  s.kind = TargetKind::HimmelblauDensity;
  s.dimension = 2;
  s.shapeParams["scale"] = 10.0;
  return make_builtin_target(s);
}

KernelConfig config(std::uint64_t len, int dr) {
  KernelConfig k;
  k.chainLengthTarget = len;
  k.drStageCount = dr;
  k.adaptationPeriod = KernelConfig::default_adaptation_period(2);
  k.startPoint = Point::Zero(2);
  k.rngSeed = 77;
  return k;
}

}  // namespace

TEST_CASE("fork-join with one worker reproduces the per-round serial kernel") {
  const auto t = himmelblau_target();
  const auto k = config(3000, 1);
  const auto fj = run_forkjoin(t, k, ProposalState::initial(2, 1), 1);
  Sampler serial(t, k, ProposalState::initial(2, 1), std::make_unique<PerRoundStreamRounds>(k.rngSeed));
  MemorySink sink(2);
  serial.run(sink);
  CHECK(fj.chain.rows() == sink.chain().rows());
}

TEST_CASE("fork-join is independent of thread count") {
  const auto t = himmelblau_target();
  const auto k = config(2000, 1);
  const auto one = run_forkjoin(t, k, ProposalState::initial(2, 1), 8, {1, false});
  const auto four = run_forkjoin(t, k, ProposalState::initial(2, 1), 8, {4, false});
  CHECK(one.chain.rows() == four.chain.rows());
  CHECK(one.tally.counts == four.tally.counts);
  CHECK(one.tally.total() + 1 == one.chain.size());
}

TEST_CASE("uniform target credits rank one only") {
  const TargetDensity flat("flat", 2, [](std::span<const double>) { return 0.0; });
  const auto fj = run_forkjoin(flat, config(500, 0), ProposalState::initial(2, 0), 6);
  CHECK(fj.tally.counts[0] == fj.tally.total());
  CHECK(fj.fit.p == 1.0);
}

TEST_CASE("multichain reduces to the serial stream for one chain") {
  BuiltinTargetSpec s;
  s.dimension = 1;
  const auto t = make_builtin_target(s);
  KernelConfig k;
  k.chainLengthTarget = 3000;
  k.startPoint = Point::Zero(1);
  k.rngSeed = 5;
  const auto mc = run_multichain(t, k, ProposalState::initial(1, 1), 1);
  MemorySink sink(1);
  (void)run_kernel(t, k, ProposalState::initial(1, 1), RandomStream::for_chain(5, 0), sink);
  REQUIRE(mc.chains[0].chain);
  CHECK(mc.chains[0].chain->rows() == sink.chain().rows());

  const auto a = run_multichain(t, k, ProposalState::initial(1, 1), 3, 3);
  const auto b = run_multichain(t, k, ProposalState::initial(1, 1), 3, 1);
  for (int i = 0; i < 3; ++i) CHECK(a.chains[i].chain->rows() == b.chains[i].chain->rows());
  CHECK(a.chains[0].chain->rows() != a.chains[1].chain->rows());
}
