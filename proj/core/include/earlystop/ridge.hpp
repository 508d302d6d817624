#pragma once

#include "earlystop/dataset.hpp"
#include "earlystop/descent.hpp"
#include "earlystop/kernels.hpp"
#include "earlystop/testing.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace earlystop {

/// Kernel ridge regression fit at the design points,
/// fitted = K (K + lambda I)^{-1} y computed through the eigensystem.
struct RidgeFit {
  double lambda = 0.0;
  Eigen::VectorXd fitted;
  /// mu_hat_j / (mu_hat_j + lambda), in eigenvalue order.
  Eigen::VectorXd hat_diag_spectral;
};

[[nodiscard]] RidgeFit krr_fit(const EmpiricalKernelEigen& eigs, const Eigen::VectorXd& y, double lambda);

/// Penalised Wald test: D = ||fitted||_n^2 with exact Gaussian null moments of
/// y^T H^2 y / n, H the spectral hat operator.
[[nodiscard]] TestReport krr_wald_test(const RidgeFit& fit, double noise_variance, double level);

/// 30 log-spaced values over [mu_hat_n + 1e-10, mu_hat_1].
[[nodiscard]] std::vector<double> default_lambda_grid(std::span<const double> mu_hat,
                                                      std::size_t count = 30);

/// Grid value with the smallest mean held-out squared error under K-fold CV.
/// Folds are contiguous blocks of a seeded shuffle; ties go to the larger lambda.
[[nodiscard]] double cv_select_lambda(const Dataset& data, const KernelSpec& spec,
                                      std::span<const double> grid, int folds = 10,
                                      std::uint64_t seed = 0);

/// Per-grid-point mean held-out squared error (same folds as cv_select_lambda).
[[nodiscard]] std::vector<double> cv_errors(const Dataset& data, const KernelSpec& spec,
                                            std::span<const double> grid, int folds = 10,
                                            std::uint64_t seed = 0);

/// sum_j h_j^4 / sum_j (1 - s_j)^4 with h_j = mu_hat_j / (mu_hat_j + lambda).
[[nodiscard]] double connection_ratio(std::span<const double> mu_hat, const StepSchedule& schedule,
                                      int t, double lambda);

}  // namespace earlystop
