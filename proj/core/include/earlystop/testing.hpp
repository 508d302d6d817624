#pragma once

#include "earlystop/descent.hpp"

#include <Eigen/Dense>

#include <span>

namespace earlystop {

/// Exact conditional mean and standard deviation of D_{n,t} under the
/// Gaussian null, scaled by the noise variance.
struct NullMoments {
  double mu = 0.0;
  double sigma = 0.0;
};

enum class Decision { Accept, Reject, Degenerate };

struct TestReport {
  double statistic = 0.0;  ///< D
  NullMoments moments;
  double z = 0.0;          ///< (D - mu) / sigma; 0 when degenerate
  double level = 0.05;
  double quantile = 0.0;   ///< z_{1 - level/2}
  Decision decision = Decision::Degenerate;

  [[nodiscard]] bool reject() const { return decision == Decision::Reject; }
  [[nodiscard]] bool degenerate() const { return decision == Decision::Degenerate; }
};

/// D = (1/n) sum f_i^2.
[[nodiscard]] double test_statistic(std::span<const double> f);
[[nodiscard]] double test_statistic(const Eigen::VectorXd& f);

/// mu = v sum_j (1 - s_j)^2 / n and sigma = v sqrt(2 sum_j (1 - s_j)^4) / n,
/// v = noise_variance.
[[nodiscard]] NullMoments null_moments(const ShrinkageDiagonal& shrink, double noise_variance = 1.0);

/// Same moments for an arbitrary spectral filter h (used by kernel ridge).
[[nodiscard]] NullMoments filter_null_moments(const Eigen::VectorXd& filter, double noise_variance = 1.0);

/// Inverse standard normal CDF.
[[nodiscard]] double normal_quantile(double p);

/// Two-sided rule |D - mu| >= z_{1-level/2} sigma. sigma == 0 yields
/// Decision::Degenerate (too few iterations to calibrate), never a silent accept.
[[nodiscard]] TestReport wald_decision(double statistic, const NullMoments& moments, double level);

}  // namespace earlystop
