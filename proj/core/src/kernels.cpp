#include "earlystop/kernels.hpp"

#include <lapacke.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace earlystop {

namespace {

// Bernoulli numbers B_0..B_20 (B_1 = -1/2 convention).
constexpr std::array<double, 21> kBernoulli = {
    1.0,           -0.5,         1.0 / 6.0,   0.0, -1.0 / 30.0,    0.0, 1.0 / 42.0,
    0.0,           -1.0 / 30.0,  0.0,         5.0 / 66.0,          0.0, -691.0 / 2730.0,
    0.0,           7.0 / 6.0,    0.0,         -3617.0 / 510.0,     0.0, 43867.0 / 798.0,
    0.0,           -174611.0 / 330.0};

constexpr int kMaxSobolevOrder = 10;

double factorial(int k) {
  double out = 1.0;
  for (int i = 2; i <= k; ++i) out *= i;
  return out;
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + " must be finite");
}

// Sorts ascending LAPACK output into non-increasing order and clamps.
Eigen::VectorXd sorted_clamped(const Eigen::VectorXd& ascending, double* raw_min) {
  const Eigen::Index n = ascending.size();
  Eigen::VectorXd out = ascending.reverse();
  if (raw_min != nullptr) *raw_min = n > 0 ? ascending(0) : 0.0;
  const double top = n > 0 ? out(0) : 0.0;
  const double floor = top > 0.0 ? EmpiricalKernelEigen::kClampRelative * top : 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(out(i) >= floor) || out(i) <= 0.0) out(i) = 0.0;
  }
  return out;
}

void check_symmetric_input(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw std::invalid_argument("kernel matrix must be square and non-empty");
  }
  if (!m.allFinite()) throw std::invalid_argument("kernel matrix has non-finite entries");
}

}  // namespace

KernelSpec KernelSpec::gaussian(double denominator) {
  KernelSpec s;
  s.family = KernelFamily::GaussianEDK;
  s.bandwidth_denominator = denominator;
  s.validate();
  return s;
}

KernelSpec KernelSpec::gaussian_bandwidth(double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("bandwidth must be > 0");
  return gaussian(2.0 * h * h);
}

KernelSpec KernelSpec::sobolev(int m) {
  KernelSpec s;
  s.family = KernelFamily::PeriodicSobolevPDK;
  s.order = m;
  s.validate();
  return s;
}

void KernelSpec::validate() const {
  switch (family) {
    case KernelFamily::GaussianEDK:
      if (!(bandwidth_denominator > 0.0) || !std::isfinite(bandwidth_denominator)) {
        throw std::invalid_argument("Gaussian bandwidth denominator must be > 0");
      }
      break;
    case KernelFamily::PeriodicSobolevPDK:
      if (order < 1 || order > kMaxSobolevOrder) {
        throw std::invalid_argument("Sobolev order must be in [1, 10]");
      }
      break;
  }
}

std::string KernelSpec::name() const {
  if (family == KernelFamily::GaussianEDK) return "gaussian";
  return "sobolev" + std::to_string(order);
}

double bernoulli_polynomial(int k, double u) {
  if (k < 0 || k > 20) throw std::invalid_argument("Bernoulli polynomial degree out of range");
  // B_k(u) = sum_j C(k, j) B_j u^{k-j}, evaluated in Horner form on u.
  double acc = 0.0;
  double binom = 1.0;  // C(k, j)
  std::array<double, 21> coeff{};
  for (int j = 0; j <= k; ++j) {
    coeff[static_cast<std::size_t>(k - j)] = binom * kBernoulli[static_cast<std::size_t>(j)];
    binom = binom * (k - j) / (j + 1);
  }
  for (int p = k; p >= 0; --p) acc = acc * u + coeff[static_cast<std::size_t>(p)];
  return acc;
}

double eval_kernel(const KernelSpec& spec, double x, double x_prime) {
  require_finite(x, "x");
  require_finite(x_prime, "x'");
  switch (spec.family) {
    case KernelFamily::GaussianEDK: {
      const double d = x - x_prime;
      return std::exp(-d * d / spec.bandwidth_denominator);
    }
    case KernelFamily::PeriodicSobolevPDK: {
      // 1 + sum_k 2 cos(2 pi k u) / (2 pi k)^{2m} = 1 + (-1)^{m+1} B_{2m}({u}) / (2m)!
      // |x - x'| is bit-identical under argument swap, and B_{2m}(u) =
      // B_{2m}(1 - u), so folding onto [0, 1/2] keeps the kernel exactly symmetric.
      double u = std::abs(x - x_prime);
      u -= std::floor(u);
      u = std::min(u, 1.0 - u);
      const int m = spec.order;
      const double sign = (m % 2 == 1) ? 1.0 : -1.0;
      return 1.0 + sign * bernoulli_polynomial(2 * m, u) / factorial(2 * m);
    }
  }
  throw std::logic_error("unknown kernel family");
}

Eigen::MatrixXd cross_kernel(const KernelSpec& spec, std::span<const double> a,
                             std::span<const double> b) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t j = 0; j < b.size(); ++j) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = eval_kernel(spec, a[i], b[j]);
    }
  }
  return out;
}

Eigen::MatrixXd empirical_kernel_matrix(const KernelSpec& spec, std::span<const double> x) {
  spec.validate();
  if (x.empty()) throw std::invalid_argument("design must contain at least one point");
  const auto n = static_cast<Eigen::Index>(x.size());
  const double inv_n = 1.0 / static_cast<double>(n);
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      const double v = eval_kernel(spec, x[static_cast<std::size_t>(i)], x[static_cast<std::size_t>(j)]) * inv_n;
      m(i, j) = v;
      m(j, i) = v;
    }
  }
  return m;
}

EmpiricalKernelEigen EmpiricalKernelEigen::from_matrix(Eigen::MatrixXd matrix) {
  check_symmetric_input(matrix);
  const auto n = static_cast<lapack_int>(matrix.rows());
  Eigen::MatrixXd vectors = matrix;
  Eigen::VectorXd values(n);
  const lapack_int info =
      LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, vectors.data(), n, values.data());
  if (info != 0) {
    throw std::runtime_error("symmetric eigensolver failed (dsyevd info=" + std::to_string(info) + ")");
  }
  if (!values.allFinite() || !vectors.allFinite()) {
    throw std::runtime_error("symmetric eigensolver produced non-finite output");
  }
  double raw_min = 0.0;
  Eigen::VectorXd sorted = sorted_clamped(values, &raw_min);
  Eigen::MatrixXd u = vectors.rowwise().reverse();
  return EmpiricalKernelEigen(std::move(matrix), std::move(u), std::move(sorted), raw_min);
}

EmpiricalKernelEigen build_empirical_kernel(const KernelSpec& spec, std::span<const double> x) {
  return EmpiricalKernelEigen::from_matrix(empirical_kernel_matrix(spec, x));
}

std::vector<double> empirical_spectrum(const KernelSpec& spec, std::span<const double> x) {
  Eigen::MatrixXd m = empirical_kernel_matrix(spec, x);
  const auto n = static_cast<lapack_int>(m.rows());
  Eigen::VectorXd values(n);
  const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'N', 'L', n, m.data(), n, values.data());
  if (info != 0) {
    throw std::runtime_error("symmetric eigensolver failed (dsyevd info=" + std::to_string(info) + ")");
  }
  if (!values.allFinite()) throw std::runtime_error("symmetric eigensolver produced non-finite output");
  Eigen::VectorXd sorted = sorted_clamped(values, nullptr);
  return {sorted.data(), sorted.data() + sorted.size()};
}

double top_eigenvalue(const Eigen::MatrixXd& matrix) {
  check_symmetric_input(matrix);
  const Eigen::Index n = matrix.rows();
  if (n == 1) return std::max(0.0, matrix(0, 0));
  // Power iteration from the all-ones vector; kernel matrices with positive
  // entries have a positive leading eigenvector, so the start is never
  // orthogonal to it.
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n).normalized();
  double lambda = 0.0;
  for (int it = 0; it < 2000; ++it) {
    Eigen::VectorXd w = matrix * v;
    const double next = v.dot(w);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    if (it > 2 && std::abs(next - lambda) <= 1e-15 * std::abs(next)) return next;
    lambda = next;
  }
  // Slow convergence (clustered top eigenvalues): fall back to a full solve.
  Eigen::MatrixXd copy = matrix;
  Eigen::VectorXd values(n);
  const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'N', 'L', static_cast<lapack_int>(n),
                                         copy.data(), static_cast<lapack_int>(n), values.data());
  if (info != 0) throw std::runtime_error("symmetric eigensolver failed");
  return values(n - 1);
}

double population_eigenvalue(const DecayModel& model, std::size_t i) {
  if (i == 0) throw std::invalid_argument("eigenvalue index starts at 1");
  const auto di = static_cast<double>(i);
  switch (model.kind) {
    case DecayKind::Polynomial:
      if (!(model.m > 0.0)) throw std::invalid_argument("polynomial decay order must be > 0");
      return std::pow(di, -2.0 * model.m);
    case DecayKind::Exponential:
      if (!(model.beta > 0.0) || !(model.p > 0.0)) {
        throw std::invalid_argument("exponential decay parameters must be > 0");
      }
      return std::exp(-model.beta * std::pow(di, model.p));
  }
  throw std::logic_error("unknown decay kind");
}

std::vector<double> population_spectrum(const DecayModel& model, std::size_t count) {
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = population_eigenvalue(model, i + 1);
  return out;
}

std::size_t kappa_index(std::span<const double> eigs, double eta, KappaTie tie) {
  if (eigs.empty()) throw std::invalid_argument("kappa_index needs a non-empty spectrum");
  if (!(eta > 0.0)) throw std::invalid_argument("kappa_index needs eta > 0");
  const double level = 1.0 / eta;
  // eigs are non-increasing, so the qualifying set is a prefix.
  if (tie == KappaTie::Inclusive) {
    auto it = std::partition_point(eigs.begin(), eigs.end(), [&](double mu) { return mu >= level; });
    return static_cast<std::size_t>(it - eigs.begin());
  }
  auto it = std::partition_point(eigs.begin(), eigs.end(), [&](double mu) { return mu > level; });
  return static_cast<std::size_t>(it - eigs.begin());
}

}  // namespace earlystop
