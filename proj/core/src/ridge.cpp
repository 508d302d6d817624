#include "earlystop/ridge.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "earlystop/random.hpp"

namespace earlystop {

namespace {

Eigen::VectorXd hat_values(const Eigen::VectorXd& mu_hat, double lambda) {
  return (mu_hat.array() / (mu_hat.array() + lambda)).matrix();
}

void check_grid(std::span<const double> grid) {
  if (grid.empty()) throw std::invalid_argument("lambda grid must be non-empty");
  for (double l : grid) {
    if (!(l > 0.0) || !std::isfinite(l)) throw std::invalid_argument("lambda grid values must be > 0");
  }
}

// Contiguous blocks of a seeded permutation; the first n % folds blocks get
// one extra point.
std::vector<std::vector<std::size_t>> make_folds(std::size_t n, int folds, std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("cross-validation needs at least 2 folds");
  if (static_cast<std::size_t>(folds) > n) {
    throw std::invalid_argument("cross-validation fold would contain no points");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(seed, {stream::kFolds});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(folds));
  const std::size_t base = n / static_cast<std::size_t>(folds);
  const std::size_t extra = n % static_cast<std::size_t>(folds);
  std::size_t pos = 0;
  for (std::size_t k = 0; k < out.size(); ++k) {
    const std::size_t size = base + (k < extra ? 1 : 0);
    out[k].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                  order.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
  }
  return out;
}

}  // namespace

RidgeFit krr_fit(const EmpiricalKernelEigen& eigs, const Eigen::VectorXd& y, double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be > 0");
  if (static_cast<std::size_t>(y.size()) != eigs.n()) throw std::invalid_argument("krr_fit: dimension mismatch");
  RidgeFit fit;
  fit.lambda = lambda;
  fit.hat_diag_spectral = hat_values(eigs.mu_hat(), lambda);
  const Eigen::VectorXd projected = eigs.U().transpose() * y;
  fit.fitted = eigs.U() * (fit.hat_diag_spectral.array() * projected.array()).matrix();
  return fit;
}

TestReport krr_wald_test(const RidgeFit& fit, double noise_variance, double level) {
  const NullMoments moments = filter_null_moments(fit.hat_diag_spectral, noise_variance);
  return wald_decision(test_statistic(fit.fitted), moments, level);
}

std::vector<double> default_lambda_grid(std::span<const double> mu_hat, std::size_t count) {
  if (mu_hat.empty()) throw std::invalid_argument("empty spectrum");
  if (count < 2) throw std::invalid_argument("grid needs at least two points");
  const double lo = std::log(mu_hat.back() + 1e-10);
  const double hi = std::log(mu_hat.front());
  if (!(hi > lo)) return {std::exp(hi)};
  std::vector<double> grid(count);
  for (std::size_t i = 0; i < count; ++i) {
    grid[i] = std::exp(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1));
  }
  return grid;
}

std::vector<double> cv_errors(const Dataset& data, const KernelSpec& spec, std::span<const double> grid,
                              int folds, std::uint64_t seed) {
  data.validate();
  check_grid(grid);
  const std::size_t n = data.n();
  const auto blocks = make_folds(n, folds, seed);
  std::vector<double> sse(grid.size(), 0.0);
  std::vector<char> held(n);

  for (const auto& block : blocks) {
    std::fill(held.begin(), held.end(), 0);
    for (std::size_t i : block) held[i] = 1;
    std::vector<double> x_train, x_out;
    std::vector<double> y_train_v, y_out_v;
    for (std::size_t i = 0; i < n; ++i) {
      if (held[i]) {
        x_out.push_back(data.x[i]);
        y_out_v.push_back(data.y[i]);
      } else {
        x_train.push_back(data.x[i]);
        y_train_v.push_back(data.y[i]);
      }
    }
    const double n_train = static_cast<double>(x_train.size());
    const EmpiricalKernelEigen eigs = build_empirical_kernel(spec, x_train);
    const Eigen::Map<const Eigen::VectorXd> y_train(y_train_v.data(), static_cast<Eigen::Index>(y_train_v.size()));
    const Eigen::Map<const Eigen::VectorXd> y_out(y_out_v.data(), static_cast<Eigen::Index>(y_out_v.size()));
    const Eigen::VectorXd z = eigs.U().transpose() * y_train;
    // Held-out predictions are K(x_out, x_train) c with training coefficients
    // c = (K + lambda I)^{-1} y / n_train = U diag(1/(mu + lambda)) U^T y / n_train.
    const Eigen::MatrixXd mapped = cross_kernel(spec, x_out, x_train) * eigs.U();
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const Eigen::VectorXd w = (z.array() / (eigs.mu_hat().array() + grid[g])).matrix() / n_train;
      sse[g] += (mapped * w - y_out).squaredNorm();
    }
  }
  for (double& e : sse) e /= static_cast<double>(n);
  return sse;
}

double cv_select_lambda(const Dataset& data, const KernelSpec& spec, std::span<const double> grid,
                        int folds, std::uint64_t seed) {
  const std::vector<double> err = cv_errors(data, spec, grid, folds, seed);
  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    if (err[g] < err[best] || (err[g] == err[best] && grid[g] > grid[best])) best = g;
  }
  return grid[best];
}

double connection_ratio(std::span<const double> mu_hat, const StepSchedule& schedule, int t, double lambda) {
  if (t < 1) throw std::invalid_argument("connection_ratio needs t >= 1");
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be > 0");
  const ShrinkageDiagonal shrink = shrinkage_diagonal(mu_hat, schedule, t);
  double ridge = 0.0;
  for (double mu : mu_hat) ridge += std::pow(mu / (mu + lambda), 4);
  const double descent = (1.0 - shrink.s.array()).square().square().sum();
  if (!(descent > 0.0)) throw std::invalid_argument("connection_ratio: tr (I - S^t)^4 is zero");
  return ridge / descent;
}

}  // namespace earlystop
