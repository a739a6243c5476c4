#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "svcflm/simulation.hpp"
#include "svcflm/tuning.hpp"

using namespace svcflm;

namespace {

std::vector<double> grid(int points) {
  std::vector<double> g(static_cast<std::size_t>(points));
  for (int k = 0; k < points; ++k) g[static_cast<std::size_t>(k)] = k / (points - 1.0);
  return g;
}

// Smoothed curves of a generated dataset, m1 = 2 per predictor.
std::vector<FPCAResult> study_fpca(const SyntheticDataset& d) {
  const BSplineBasis sb = BSplineBasis::uniform(0.0, 1.0, 4, 8);
  std::vector<FPCAResult> out;
  for (int j = 0; j < d.predictors(); ++j) {
    FunctionalSample s{sb, Eigen::MatrixXd(d.samples(), sb.size())};
    for (int i = 0; i < d.samples(); ++i) s.coef.row(i) = smooth_curve(d.curve(j, i), sb).transpose();
    out.push_back(fpca(s, 2));
  }
  return out;
}

}  // namespace

static void BM_BasisEvaluate(benchmark::State& state) {
  const BSplineBasis b = BSplineBasis::uniform(0.0, 1.0, 4, static_cast<int>(state.range(0)));
  const auto g = grid(1000);
  for (auto _ : state) benchmark::DoNotOptimize(b.evaluate(g));
}
BENCHMARK(BM_BasisEvaluate)->Arg(8)->Arg(32);

static void BM_Fpca(benchmark::State& state) {
  SimulationConfig c;
  c.n = static_cast<int>(state.range(0));
  const SyntheticDataset d = generate(c);
  for (auto _ : state) benchmark::DoNotOptimize(study_fpca(d));
}
BENCHMARK(BM_Fpca)->Arg(100)->Arg(400);

static void BM_FitPath(benchmark::State& state) {
  SimulationConfig c;
  c.n = static_cast<int>(state.range(0));
  const SyntheticDataset d = generate(c);
  const auto fp = study_fpca(d);
  const VCFLMDesign des = build_design(fp, d.t, exogenous_basis(0.0, 1.0, 4), d.y);
  const OrthogonalizedDesign orth = orthogonalize(des);
  const Eigen::VectorXd w = adaptive_weights(orth, des.y);
  const auto lambdas = default_lambda_grid(orth, des.y, w, 1.0, 50, 1e-3);
  for (auto _ : state) {
    for (double l : lambdas) benchmark::DoNotOptimize(fit(orth, des.y, PenaltySpec{l, 1.0, w}));
  }
}
BENCHMARK(BM_FitPath)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

static void BM_Replicate(benchmark::State& state) {
  SimulationConfig c;
  const SyntheticDataset d = generate(c);
  const EstimatorConfig e;
  for (auto _ : state) benchmark::DoNotOptimize(run_replicate(d, Method::asvcflm, e));
}
BENCHMARK(BM_Replicate)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
