#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace earlystop {

enum class KernelFamily {
  GaussianEDK,         ///< exp(-(x - x')^2 / denominator)
  PeriodicSobolevPDK,  ///< periodic Sobolev kernel of order m on [0, 1)
};

/// Reproducing kernel for one-dimensional designs.
///
/// The Gaussian kernel has exponentially decaying eigenvalues; the periodic
/// Sobolev kernel of order m has eigenvalues 1 and (2 pi k)^{-2m} (each with
/// multiplicity two), i.e. polynomial decay i^{-2m}.
struct KernelSpec {
  KernelFamily family = KernelFamily::GaussianEDK;
  /// Gaussian only: K(x, x') = exp(-(x - x')^2 / bandwidth_denominator).
  double bandwidth_denominator = 2.0;
  /// Sobolev only: smoothness order m.
  int order = 2;

  static KernelSpec gaussian(double denominator = 2.0);
  /// Gaussian with the usual bandwidth parametrisation exp(-d^2 / (2 h^2)).
  static KernelSpec gaussian_bandwidth(double h);
  static KernelSpec sobolev(int m = 2);

  /// Throws std::invalid_argument when the parameters are out of range.
  void validate() const;
  /// Short identifier used in reports: "gaussian" or "sobolev<m>".
  [[nodiscard]] std::string name() const;

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

[[nodiscard]] double eval_kernel(const KernelSpec& spec, double x, double x_prime);

/// Raw kernel values K(a_i, b_j) (no 1/n normalisation).
[[nodiscard]] Eigen::MatrixXd cross_kernel(const KernelSpec& spec,
                                           std::span<const double> a,
                                           std::span<const double> b);

/// Bernoulli polynomial B_k(u) for 0 <= k <= 20.
[[nodiscard]] double bernoulli_polynomial(int k, double u);

/// The n x n empirical kernel matrix K(x_i, x_j) / n with its eigensystem,
/// eigenvalues sorted non-increasing and clamped at zero.
class EmpiricalKernelEigen {
 public:
  /// Relative clamp: eigenvalues below this times mu_hat_1 become exactly 0.
  static constexpr double kClampRelative = 1e-12;

  /// Decompose an already-normalised symmetric matrix.
  static EmpiricalKernelEigen from_matrix(Eigen::MatrixXd matrix);

  [[nodiscard]] std::size_t n() const { return static_cast<std::size_t>(matrix_.rows()); }
  [[nodiscard]] const Eigen::MatrixXd& matrix() const { return matrix_; }
  [[nodiscard]] const Eigen::MatrixXd& U() const { return eigenvectors_; }
  [[nodiscard]] const Eigen::VectorXd& mu_hat() const { return eigenvalues_; }
  [[nodiscard]] std::span<const double> eigenvalues() const {
    return {eigenvalues_.data(), static_cast<std::size_t>(eigenvalues_.size())};
  }
  /// Smallest eigenvalue as returned by the solver, before clamping.
  [[nodiscard]] double raw_min_eigenvalue() const { return raw_min_; }

 private:
  EmpiricalKernelEigen(Eigen::MatrixXd matrix, Eigen::MatrixXd vectors,
                       Eigen::VectorXd values, double raw_min)
      : matrix_(std::move(matrix)),
        eigenvectors_(std::move(vectors)),
        eigenvalues_(std::move(values)),
        raw_min_(raw_min) {}

  Eigen::MatrixXd matrix_;
  Eigen::MatrixXd eigenvectors_;
  Eigen::VectorXd eigenvalues_;
  double raw_min_ = 0.0;
};

/// Normalised kernel matrix [K]_ij = K(x_i, x_j) / n.
[[nodiscard]] Eigen::MatrixXd empirical_kernel_matrix(const KernelSpec& spec,
                                                      std::span<const double> x);

[[nodiscard]] EmpiricalKernelEigen build_empirical_kernel(const KernelSpec& spec,
                                                          std::span<const double> x);

/// Eigenvalues only (sorted non-increasing, clamped). Much cheaper than the
/// full decomposition; enough for the testing and estimation stopping rules.
[[nodiscard]] std::vector<double> empirical_spectrum(const KernelSpec& spec,
                                                     std::span<const double> x);

/// Largest eigenvalue of a symmetric PSD matrix.
[[nodiscard]] double top_eigenvalue(const Eigen::MatrixXd& matrix);

// ---------------------------------------------------------------------------
// Population eigen-decay models

enum class DecayKind { Polynomial, Exponential };

struct DecayModel {
  DecayKind kind = DecayKind::Polynomial;
  double m = 2.0;     ///< polynomial: mu_i = i^{-2m}
  double beta = 1.0;  ///< exponential: mu_i = exp(-beta i^p)
  double p = 2.0;

  static DecayModel polynomial(double m) { return {DecayKind::Polynomial, m, 1.0, 2.0}; }
  static DecayModel exponential(double beta, double p) {
    return {DecayKind::Exponential, 2.0, beta, p};
  }
};

/// mu_i for i >= 1.
[[nodiscard]] double population_eigenvalue(const DecayModel& model, std::size_t i);

/// First `count` population eigenvalues.
[[nodiscard]] std::vector<double> population_spectrum(const DecayModel& model,
                                                      std::size_t count);

enum class KappaTie {
  Inclusive,  ///< largest j with mu_j >= 1/eta (population kappa_t)
  Exclusive,  ///< largest j with mu_j > 1/eta (empirical kappa~_t)
};

/// Number of leading eigenvalues at or above the 1/eta level. Returns 0 when
/// none qualify and eigs.size() when all do.
[[nodiscard]] std::size_t kappa_index(std::span<const double> eigs, double eta,
                                      KappaTie tie = KappaTie::Inclusive);

}  // namespace earlystop
