#include <benchmark/benchmark.h>

#include <random>

#include <spdlog/spdlog.h>

#include "bglgm/bglgm.hpp"

using namespace bglgm;

namespace {

std::vector<Site> sites(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  std::vector<Site> s(static_cast<std::size_t>(n));
  for (auto& site : s) site = {u(rng), u(rng)};
  return s;
}

const CovarianceModel kTheta{.sigma2 = 0.25, .tau2 = 1.0, .phi = 30.0, .kappa = 1.5};

void BM_MaternClosedForm(benchmark::State& state) {
  double h = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(matern_correlation(h, 30.0, 1.5));
    h = h > 100.0 ? 0.0 : h + 0.37;
  }
}
BENCHMARK(BM_MaternClosedForm);

void BM_MaternBessel(benchmark::State& state) {
  double h = 0.01;
  for (auto _ : state) {
    benchmark::DoNotOptimize(matern_correlation(h, 30.0, 1.2));
    h = h > 100.0 ? 0.01 : h + 0.37;
  }
}
BENCHMARK(BM_MaternBessel);

void BM_CovarianceCholesky(benchmark::State& state) {
  const auto s = sites(static_cast<int>(state.range(0)), 1);
  for (auto _ : state) {
    const auto cov = build_covariance_matrix(s, kTheta, true);
    benchmark::DoNotOptimize(cov.lower_factor().data());
  }
}
BENCHMARK(BM_CovarianceCholesky)->Arg(40)->Arg(100)->Arg(400);

SyntheticDataset dataset(int n) {
  SyntheticConfig cfg;
  cfg.n_sites = n;
  cfg.seed = 3;
  return generate_synthetic_dataset(cfg);
}

void BM_ThetaContext(benchmark::State& state) {
  const auto d = dataset(static_cast<int>(state.range(0)));
  const SpatialPosterior post(d.data.sites(), build_design_matrix(d.data), d.data.counts(),
                              d.data.totals(), PriorSpec::defaults());
  for (auto _ : state) benchmark::DoNotOptimize(post.context_for(kTheta).log_det_sigma);
}
BENCHMARK(BM_ThetaContext)->Arg(40)->Arg(100);

void BM_LogTargetGradient(benchmark::State& state) {
  const auto d = dataset(static_cast<int>(state.range(0)));
  const SpatialPosterior post(d.data.sites(), build_design_matrix(d.data), d.data.counts(),
                              d.data.totals(), PriorSpec::defaults());
  const auto ctx = post.context_for(kTheta);
  const auto s = post.whiten(initial_state(post), ctx);
  Vector g;
  for (auto _ : state) benchmark::DoNotOptimize(post.log_target_with_gradient(s, ctx, g));
}
BENCHMARK(BM_LogTargetGradient)->Arg(40)->Arg(100);

void BM_ChainIterations(benchmark::State& state) {
  const auto d = dataset(40);
  const Matrix X = build_design_matrix(d.data);
  McmcConfig cfg;
  cfg.iterations = 1000;
  cfg.burn_in = 0;
  cfg.thin = 10;
  for (auto _ : state) {
    const auto chain = run_chain(d.data, X, PriorSpec::defaults(), cfg);
    benchmark::DoNotOptimize(chain.draws.size());
  }
  state.SetItemsProcessed(state.iterations() * cfg.iterations);
}
BENCHMARK(BM_ChainIterations)->Unit(benchmark::kMillisecond);

void BM_ConditionalDraw(benchmark::State& state) {
  const auto obs = sites(40, 4);
  const auto targets = sites(static_cast<int>(state.range(0)), 5);
  Rng rng(6);
  const Vector values = Vector::NullaryExpr(40, [&] { return std::normal_distribution<double>()(rng); });
  for (auto _ : state)
    benchmark::DoNotOptimize(conditional_field_draw(obs, values, targets, kTheta, rng).draw.data());
}
BENCHMARK(BM_ConditionalDraw)->Arg(20)->Arg(400);

}  // namespace
int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::warn);
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
