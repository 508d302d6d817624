#pragma once

#include "earlystop/kernels.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

namespace earlystop {

/// Step sizes alpha_tau for the gradient recursion.
///
/// Only constant schedules are built today. Every schedule satisfies
/// 0 < alpha_tau <= min{1, 1/mu_hat_1}, alpha non-increasing, and
/// eta(t) = sum_{tau < t} alpha_tau.
class StepSchedule {
 public:
  /// Constant schedule against a given leading eigenvalue. `alpha` empty
  /// means "auto": alpha = min{1, 1/mu_hat_1}. An explicit alpha above the
  /// cap is clipped and `clipped()` reports it.
  static StepSchedule constant(double mu_hat_1, std::optional<double> alpha = std::nullopt);

  [[nodiscard]] double step(int tau) const;
  [[nodiscard]] double eta(int t) const;
  [[nodiscard]] double cap() const { return cap_; }
  [[nodiscard]] double alpha() const { return alpha_; }
  [[nodiscard]] bool clipped() const { return clipped_; }
  /// The alpha originally asked for (empty for auto); reused when the same
  /// rule is applied to a bootstrap sample with a different cap.
  [[nodiscard]] std::optional<double> requested() const { return requested_; }

 private:
  StepSchedule(double alpha, double cap, bool clipped, std::optional<double> requested)
      : alpha_(alpha), cap_(cap), clipped_(clipped), requested_(requested) {}

  double alpha_;
  double cap_;
  bool clipped_;
  std::optional<double> requested_;
};

[[nodiscard]] StepSchedule make_schedule(const EmpiricalKernelEigen& eigs,
                                         std::optional<double> alpha = std::nullopt);

/// Diagonal of S^t = prod_{tau < t} (I - alpha_tau Lambda).
struct ShrinkageDiagonal {
  int t = 0;
  Eigen::VectorXd s;
};

[[nodiscard]] ShrinkageDiagonal shrinkage_diagonal(std::span<const double> mu_hat,
                                                   const StepSchedule& schedule, int t);

/// Iterate at the design points together with its spectral coordinates and
/// representer coefficients: f = sqrt(n) U gamma = n K c.
struct TrajectoryState {
  int t = 0;
  Eigen::VectorXd f;
  Eigen::VectorXd gamma;
  Eigen::VectorXd coeffs;
};

/// One step f - alpha K (f - y), with K the normalised kernel matrix.
[[nodiscard]] Eigen::VectorXd gd_step(const Eigen::VectorXd& f, const Eigen::MatrixXd& matrix,
                                      const Eigen::VectorXd& y, double alpha);

/// States for t = 0..t_max from the zero start.
[[nodiscard]] std::vector<TrajectoryState> run_trajectory(const EmpiricalKernelEigen& eigs,
                                                          const Eigen::VectorXd& y,
                                                          const StepSchedule& schedule,
                                                          int t_max);

/// Incremental form of run_trajectory that keeps only the current state.
/// Works directly on a kernel matrix so bootstrap samples do not need a full
/// eigendecomposition.
class GradientDescent {
 public:
  GradientDescent(const Eigen::MatrixXd& matrix, Eigen::VectorXd y, StepSchedule schedule);

  void step();
  [[nodiscard]] int t() const { return t_; }
  [[nodiscard]] const Eigen::VectorXd& fitted() const { return f_; }
  [[nodiscard]] const Eigen::VectorXd& coeffs() const { return coeffs_; }
  [[nodiscard]] const StepSchedule& schedule() const { return schedule_; }

 private:
  const Eigen::MatrixXd* matrix_;
  Eigen::VectorXd y_;
  StepSchedule schedule_;
  Eigen::VectorXd f_;
  Eigen::VectorXd coeffs_;
  Eigen::VectorXd residual_;
  int t_ = 0;
};

/// Closed form U (I - S^t) U^T y of the zero-start iterate.
[[nodiscard]] Eigen::VectorXd spectral_fitted_values(const EmpiricalKernelEigen& eigs,
                                                     const Eigen::VectorXd& y,
                                                     const StepSchedule& schedule, int t);

/// f(x_new) = sum_i coeffs_i K(x_train_i, x_new).
[[nodiscard]] double evaluate_function(std::span<const double> coeffs, const KernelSpec& spec,
                                       std::span<const double> x_train, double x_new);

}  // namespace earlystop
