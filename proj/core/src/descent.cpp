#include "earlystop/descent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace earlystop {

StepSchedule StepSchedule::constant(double mu_hat_1, std::optional<double> alpha) {
  if (!std::isfinite(mu_hat_1) || mu_hat_1 < 0.0) {
    throw std::invalid_argument("leading eigenvalue must be finite and >= 0");
  }
  const double cap = mu_hat_1 > 1.0 ? 1.0 / mu_hat_1 : 1.0;
  if (!alpha) return StepSchedule(cap, cap, false, std::nullopt);
  if (!(*alpha > 0.0) || !std::isfinite(*alpha)) {
    throw std::invalid_argument("step size must be > 0");
  }
  if (*alpha > cap) return StepSchedule(cap, cap, true, alpha);
  return StepSchedule(*alpha, cap, false, alpha);
}

double StepSchedule::step(int tau) const {
  if (tau < 0) throw std::invalid_argument("step index must be >= 0");
  return alpha_;
}

double StepSchedule::eta(int t) const {
  if (t < 0) throw std::invalid_argument("iteration count must be >= 0");
  return alpha_ * static_cast<double>(t);
}

StepSchedule make_schedule(const EmpiricalKernelEigen& eigs, std::optional<double> alpha) {
  return StepSchedule::constant(eigs.mu_hat()(0), alpha);
}

ShrinkageDiagonal shrinkage_diagonal(std::span<const double> mu_hat, const StepSchedule& schedule,
                                     int t) {
  if (t < 0) throw std::invalid_argument("iteration count must be >= 0");
  ShrinkageDiagonal out;
  out.t = t;
  out.s.resize(static_cast<Eigen::Index>(mu_hat.size()));
  const double alpha = schedule.alpha();
  for (std::size_t j = 0; j < mu_hat.size(); ++j) {
    // Constant schedule: the product collapses to a power.
    const double factor = std::max(0.0, 1.0 - alpha * mu_hat[j]);
    out.s(static_cast<Eigen::Index>(j)) = t == 0 ? 1.0 : std::pow(factor, t);
  }
  return out;
}

Eigen::VectorXd gd_step(const Eigen::VectorXd& f, const Eigen::MatrixXd& matrix,
                        const Eigen::VectorXd& y, double alpha) {
  if (matrix.rows() != matrix.cols() || f.size() != matrix.rows() || y.size() != f.size()) {
    throw std::invalid_argument("gd_step: dimension mismatch");
  }
  return f - alpha * (matrix * (f - y));
}

GradientDescent::GradientDescent(const Eigen::MatrixXd& matrix, Eigen::VectorXd y,
                                 StepSchedule schedule)
    : matrix_(&matrix),
      y_(std::move(y)),
      schedule_(schedule),
      f_(Eigen::VectorXd::Zero(matrix.rows())),
      coeffs_(Eigen::VectorXd::Zero(matrix.rows())),
      residual_(matrix.rows()) {
  if (matrix.rows() != matrix.cols() || y_.size() != matrix.rows()) {
    throw std::invalid_argument("GradientDescent: dimension mismatch");
  }
}

void GradientDescent::step() {
  const double alpha = schedule_.step(t_);
  const double n = static_cast<double>(f_.size());
  residual_ = f_ - y_;
  coeffs_.noalias() -= (alpha / n) * residual_;
  f_.noalias() -= alpha * (*matrix_ * residual_);
  ++t_;
}

std::vector<TrajectoryState> run_trajectory(const EmpiricalKernelEigen& eigs,
                                            const Eigen::VectorXd& y, const StepSchedule& schedule,
                                            int t_max) {
  if (t_max < 0) throw std::invalid_argument("t_max must be >= 0");
  if (static_cast<std::size_t>(y.size()) != eigs.n()) {
    throw std::invalid_argument("run_trajectory: dimension mismatch");
  }
  const double sqrt_n = std::sqrt(static_cast<double>(eigs.n()));
  GradientDescent gd(eigs.matrix(), y, schedule);
  std::vector<TrajectoryState> states;
  states.reserve(static_cast<std::size_t>(t_max) + 1);
  auto snapshot = [&] {
    TrajectoryState s;
    s.t = gd.t();
    s.f = gd.fitted();
    s.gamma = eigs.U().transpose() * gd.fitted() / sqrt_n;
    s.coeffs = gd.coeffs();
    states.push_back(std::move(s));
  };
  snapshot();
  for (int t = 0; t < t_max; ++t) {
    gd.step();
    snapshot();
  }
  return states;
}

Eigen::VectorXd spectral_fitted_values(const EmpiricalKernelEigen& eigs, const Eigen::VectorXd& y,
                                       const StepSchedule& schedule, int t) {
  if (static_cast<std::size_t>(y.size()) != eigs.n()) {
    throw std::invalid_argument("spectral_fitted_values: dimension mismatch");
  }
  const ShrinkageDiagonal shrink = shrinkage_diagonal(eigs.eigenvalues(), schedule, t);
  const Eigen::VectorXd projected = eigs.U().transpose() * y;
  return eigs.U() * ((1.0 - shrink.s.array()) * projected.array()).matrix();
}

double evaluate_function(std::span<const double> coeffs, const KernelSpec& spec,
                         std::span<const double> x_train, double x_new) {
  if (coeffs.size() != x_train.size()) {
    throw std::invalid_argument("evaluate_function: coefficient/design length mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < coeffs.size(); ++i) acc += coeffs[i] * eval_kernel(spec, x_train[i], x_new);
  return acc;
}

}  // namespace earlystop
