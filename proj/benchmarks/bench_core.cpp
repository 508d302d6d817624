#include <benchmark/benchmark.h>

#include "earlystop/harness.hpp"
#include "earlystop/ridge.hpp"
#include "earlystop/stopping.hpp"

using namespace earlystop;

namespace {

Dataset sample(std::size_t n) { return generate_dataset(SignalModel{SignalId::MCos, 1.0}, n, 1.0, 17); }

const KernelSpec kKernel = experiment_kernel(KernelFamily::GaussianEDK);

}  // namespace

static void BM_Eigendecomposition(benchmark::State& state) {
  const Dataset d = sample(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(build_empirical_kernel(kKernel, d.x));
}
BENCHMARK(BM_Eigendecomposition)->Arg(100)->Arg(200)->Arg(500)->Arg(1000)->Unit(benchmark::kMillisecond);

static void BM_SpectrumOnly(benchmark::State& state) {
  const Dataset d = sample(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(empirical_spectrum(kKernel, d.x));
}
BENCHMARK(BM_SpectrumOnly)->Arg(500)->Arg(1000)->Unit(benchmark::kMillisecond);

// 100 iterations: matrix-vector steps vs one closed-form evaluation.
static void BM_IterativeTrajectory(benchmark::State& state) {
  const Dataset d = sample(static_cast<std::size_t>(state.range(0)));
  const Eigen::MatrixXd matrix = empirical_kernel_matrix(kKernel, d.x);
  const auto eigs = build_empirical_kernel(kKernel, d.x);
  const Eigen::Map<const Eigen::VectorXd> y(d.y.data(), static_cast<Eigen::Index>(d.n()));
  for (auto _ : state) {
    GradientDescent gd(matrix, y, make_schedule(eigs));
    for (int t = 0; t < 100; ++t) gd.step();
    benchmark::DoNotOptimize(gd.fitted().data());
  }
}
BENCHMARK(BM_IterativeTrajectory)->Arg(200)->Arg(500)->Unit(benchmark::kMillisecond);

static void BM_SpectralTrajectory(benchmark::State& state) {
  const Dataset d = sample(static_cast<std::size_t>(state.range(0)));
  const auto eigs = build_empirical_kernel(kKernel, d.x);
  const Eigen::Map<const Eigen::VectorXd> y(d.y.data(), static_cast<Eigen::Index>(d.n()));
  const StepSchedule schedule = make_schedule(eigs);
  for (auto _ : state) benchmark::DoNotOptimize(spectral_fitted_values(eigs, y, schedule, 100));
}
BENCHMARK(BM_SpectralTrajectory)->Arg(200)->Arg(500)->Unit(benchmark::kMillisecond);

static void BM_BootstrapRule(benchmark::State& state) {
  const Dataset d = sample(static_cast<std::size_t>(state.range(0)));
  const auto eigs = build_empirical_kernel(kKernel, d.x);
  const StepSchedule schedule = make_schedule(eigs);
  BootstrapConfig cfg;
  cfg.seed = 3;
  for (auto _ : state) benchmark::DoNotOptimize(stop_rule_bootstrap(d, kKernel, eigs, schedule, cfg));
}
BENCHMARK(BM_BootstrapRule)->Arg(200)->Arg(500)->Unit(benchmark::kMillisecond);

static void BM_CrossValidation(benchmark::State& state) {
  const Dataset d = sample(static_cast<std::size_t>(state.range(0)));
  const auto grid = default_lambda_grid(empirical_spectrum(kKernel, d.x));
  for (auto _ : state) benchmark::DoNotOptimize(cv_select_lambda(d, kKernel, grid, 10, 5));
}
BENCHMARK(BM_CrossValidation)->Arg(200)->Arg(500)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
