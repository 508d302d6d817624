#pragma once

#include "earlystop/dataset.hpp"
#include "earlystop/descent.hpp"
#include "earlystop/kernels.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace earlystop {

enum class StoppingRule { Testing, Estimation, Oracle, Bootstrap };

[[nodiscard]] std::string rule_name(StoppingRule rule);

/// Both sides of a rule's inequality at one iteration. The rule stops at the
/// first t with bias_side < threshold_side.
struct TraceRow {
  int t = 0;
  double eta = 0.0;
  double bias_side = 0.0;
  double threshold_side = 0.0;
  /// Squared separation rate 1/eta_t + sigma_{n,t}.
  double separation2 = 0.0;
};

struct StoppingDiagnostics {
  StoppingRule rule = StoppingRule::Testing;
  int T = 0;
  double eta_T = 0.0;
  std::vector<TraceRow> trace;  ///< rows for t = 1..T (or to the horizon on failure)
  std::size_t kappa_emp = 0;    ///< largest j with mu_hat_j > 1/eta_T
  std::optional<std::size_t> kappa_pop;  ///< largest j with mu_j >= 1/eta_T
};

/// The rule's inequality never held for t <= t_max. Carries the full trace.
class HorizonExhausted : public std::runtime_error {
 public:
  explicit HorizonExhausted(StoppingDiagnostics diagnostics);
  [[nodiscard]] const StoppingDiagnostics& diagnostics() const { return diagnostics_; }

 private:
  StoppingDiagnostics diagnostics_;
};

struct BootstrapConfig {
  int B = 10;
  std::uint64_t seed = 0;
  int t_max = 0;  ///< 0 selects default_horizon()

  void validate() const;
};

/// ceil(50 n / alpha).
[[nodiscard]] int default_horizon(std::size_t n, const StepSchedule& schedule);

/// T* = min{t : 1/eta_t < (sigma/n) sqrt(sum_i min{1, eta_t mu_hat_i})}.
[[nodiscard]] StoppingDiagnostics stop_rule_testing(std::span<const double> mu_hat,
                                                    const StepSchedule& schedule, double noise_sd,
                                                    int t_max,
                                                    const std::optional<DecayModel>& population = {});

/// T~ = min{t : 1/eta_t < (sigma/n) sum_i min{1, eta_t mu_hat_i}}.
[[nodiscard]] StoppingDiagnostics stop_rule_estimation(std::span<const double> mu_hat,
                                                       const StepSchedule& schedule, double noise_sd,
                                                       int t_max,
                                                       const std::optional<DecayModel>& population = {});

/// T-dagger = min{t : (1/n) sum_i S_ii^2 [U^T f*]_i^2 < (1/n) sqrt(2 tr (I - S^t)^4)}.
[[nodiscard]] StoppingDiagnostics stop_rule_oracle(const EmpiricalKernelEigen& eigs,
                                                   const StepSchedule& schedule,
                                                   std::span<const double> f_star_values, int t_max);

/// Oracle rule with the true bias replaced by the pair-bootstrap proxy
/// (1/n) ||S^t U^T f_tB||^2, f_tB the average of B bootstrap fits evaluated at
/// the original design. U and S^t come from `eigs` (the original sample).
[[nodiscard]] StoppingDiagnostics stop_rule_bootstrap(const Dataset& data, const KernelSpec& spec,
                                                      const EmpiricalKernelEigen& eigs,
                                                      const StepSchedule& schedule,
                                                      const BootstrapConfig& cfg);

/// Convenience overload that decomposes the original sample itself.
[[nodiscard]] StoppingDiagnostics stop_rule_bootstrap(const Dataset& data, const KernelSpec& spec,
                                                      const StepSchedule& schedule,
                                                      const BootstrapConfig& cfg);

/// Reference implementation of the bootstrap proxy at iteration t that runs
/// run_trajectory on each bootstrap sample and evaluates the fits point by
/// point with evaluate_function. Quadratic in t; intended for tests.
[[nodiscard]] double bootstrap_bias_proxy_reference(const Dataset& data, const KernelSpec& spec,
                                                    const EmpiricalKernelEigen& eigs,
                                                    const StepSchedule& schedule,
                                                    const BootstrapConfig& cfg, int t);

}  // namespace earlystop
