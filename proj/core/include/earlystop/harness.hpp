#pragma once

#include "earlystop/dataset.hpp"
#include "earlystop/kernels.hpp"
#include "earlystop/stopping.hpp"
#include "earlystop/testing.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace earlystop {

/// Gaussian bandwidth h used by the simulation drivers and the CLI. With the
/// unit-bandwidth kernel the cos(4 pi x) family sits in eigendirections whose
/// eigenvalues are below 1e-8, so no finite horizon can fit it.
inline constexpr double kExperimentGaussianBandwidth = 0.1;

/// Kernel used by experiments for a family: Gaussian at the experiment
/// bandwidth, or the second-order periodic Sobolev kernel.
[[nodiscard]] KernelSpec experiment_kernel(KernelFamily family);

enum class Method { ES, OracleES, PenalizedCV };

[[nodiscard]] std::string method_name(Method m);
[[nodiscard]] Method parse_method(const std::string& name);

struct ExperimentConfig {
  SignalModel signal;
  KernelSpec kernel = experiment_kernel(KernelFamily::GaussianEDK);
  std::vector<std::size_t> n_grid{200};
  int replicates = 500;
  double level = 0.05;
  std::vector<Method> methods{Method::ES};
  std::vector<double> gammas;  ///< forced-horizon exponents (sweep only)
  std::uint64_t seed = 0;
  BootstrapConfig bootstrap;   ///< seed field is ignored; derived per replicate
  std::optional<double> alpha; ///< empty = auto, min{1, 1/mu_hat_1}
  double noise_sd = 1.0;
  int cv_folds = 10;
  int threads = 1;

  void validate() const;
};

/// One (method, kernel, signal, c, n, gamma) cell of a size/power run.
struct CellRecord {
  std::string method;
  std::string kernel;
  std::string signal;
  double c = 0.0;
  std::size_t n = 0;
  std::optional<double> gamma;
  int replicates = 0;
  int rejections = 0;
  double rate = 0.0;                 ///< rejections / replicates
  std::optional<double> mean_T;      ///< absent for the penalised test
  double mean_eta_T = 0.0;           ///< for the penalised test: mean 1/lambda
  int failures = 0;                  ///< horizon exhaustion
  int degenerate = 0;                ///< sigma = 0 at the stopping point
  bool horizon_clamped = false;      ///< sweep: forced T < 1 clamped to 1
  double wall_ms = 0.0;
  std::uint64_t seed = 0;

  /// False when more than 1% of replicates failed.
  [[nodiscard]] bool valid() const { return failures * 100 <= replicates; }
};

struct CurveRow {
  int t = 0;
  double eta_t = 0.0;
  double mse = 0.0;
  std::optional<double> power;  ///< absent when sigma_{n,t} = 0
  double mu_nt = 0.0;
  double sigma_nt = 0.0;
};

struct CurveSummary {
  int argmin_mse_t = 0;    ///< over t >= 1
  int argmax_power_t = 0;  ///< over t >= 1
  double mean_T_star = 0.0;
  double mean_T_tilde = 0.0;
};

struct SimulationReport {
  std::vector<CellRecord> cells;
  std::vector<CurveRow> curves;
  std::optional<CurveSummary> curve_summary;
  std::map<std::string, std::string> metadata;
};

[[nodiscard]] Dataset generate_dataset(const SignalModel& signal, std::size_t n, double noise_sd,
                                       std::uint64_t seed);

/// Seed of replicate r in the cell identified by (kernel, signal, n); the
/// method is deliberately not part of the key so methods see identical data.
[[nodiscard]] std::uint64_t replicate_seed(std::uint64_t master, const KernelSpec& kernel,
                                           const SignalModel& signal, std::size_t n, int r);

/// Outcome of one method on one dataset.
struct ReplicateOutcome {
  bool failed = false;
  TestReport report;
  std::optional<int> T;
  double eta_or_inverse_lambda = 0.0;
};

[[nodiscard]] ReplicateOutcome run_method_once(Method method, const Dataset& data,
                                               const KernelSpec& kernel,
                                               const EmpiricalKernelEigen& eigs,
                                               const ExperimentConfig& cfg, std::uint64_t rep_seed);

/// Size/power grid over cfg.n_grid x cfg.methods; all methods share datasets.
[[nodiscard]] SimulationReport run_size_power(const ExperimentConfig& cfg);

/// Same as run_size_power, defaulting to all three methods when none are given.
[[nodiscard]] SimulationReport run_method_comparison(const ExperimentConfig& cfg);

/// Per-iteration MSE and power for t = 0..t_max at the single n in cfg.n_grid.
[[nodiscard]] SimulationReport run_iteration_curves(const ExperimentConfig& cfg, int t_max);

/// Forced horizon T = round(base(n)^gamma): base n^{4m/(4m+1)} for the Sobolev
/// kernel and n / (log n)^{1/4} for the Gaussian kernel.
[[nodiscard]] SimulationReport run_gamma_sweep(const ExperimentConfig& cfg);

/// Horizon base used by run_gamma_sweep.
[[nodiscard]] double sweep_base(const KernelSpec& kernel, std::size_t n);

/// Sorts cells by (method, kernel, signal, c, n, gamma).
void sort_cells(std::vector<CellRecord>& cells);

}  // namespace earlystop
