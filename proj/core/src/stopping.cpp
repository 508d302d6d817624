#include "earlystop/stopping.hpp"

#include <algorithm>
#include <cmath>

#include "earlystop/random.hpp"

namespace earlystop {

namespace {

// Running diagonal of S^t for t = 0, 1, 2, ... (product form, so it also
// covers non-constant schedules).
class ShrinkageTracker {
 public:
  ShrinkageTracker(std::span<const double> mu_hat, const StepSchedule& schedule)
      : mu_(mu_hat.begin(), mu_hat.end()), schedule_(schedule), s_(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(mu_hat.size()))) {}

  void advance() {
    const double alpha = schedule_.step(t_);
    for (Eigen::Index j = 0; j < s_.size(); ++j) {
      s_(j) *= std::max(0.0, 1.0 - alpha * mu_[static_cast<std::size_t>(j)]);
    }
    ++t_;
  }

  [[nodiscard]] int t() const { return t_; }
  [[nodiscard]] double eta() const { return schedule_.eta(t_); }
  [[nodiscard]] const Eigen::VectorXd& s() const { return s_; }

  /// sqrt(2 tr (I - S^t)^4) / n.
  [[nodiscard]] double null_sd() const {
    const double n = static_cast<double>(s_.size());
    return std::sqrt(2.0 * (1.0 - s_.array()).square().square().sum()) / n;
  }

 private:
  std::vector<double> mu_;
  const StepSchedule& schedule_;
  Eigen::VectorXd s_;
  int t_ = 0;
};

double effective_dimension(std::span<const double> mu_hat, double eta) {
  double acc = 0.0;
  for (double mu : mu_hat) {
    const double v = eta * mu;
    if (v >= 1.0) {
      acc += 1.0;
    } else {
      if (v <= 0.0) break;  // sorted non-increasing; the rest contribute 0
      acc += v;
    }
  }
  return acc;
}

void finish(StoppingDiagnostics& d, std::span<const double> mu_hat,
            const std::optional<DecayModel>& population) {
  d.kappa_emp = kappa_index(mu_hat, d.eta_T, KappaTie::Exclusive);
  if (population) {
    const auto pop = population_spectrum(*population, mu_hat.size());
    d.kappa_pop = kappa_index(pop, d.eta_T, KappaTie::Inclusive);
  }
}

template <class Sides>
StoppingDiagnostics first_crossing(StoppingRule rule, std::span<const double> mu_hat,
                                   const StepSchedule& schedule, int t_max,
                                   const std::optional<DecayModel>& population, Sides&& sides) {
  if (mu_hat.empty()) throw std::invalid_argument("stopping rule needs a non-empty spectrum");
  if (t_max < 1) throw std::invalid_argument("t_max must be >= 1");
  StoppingDiagnostics d;
  d.rule = rule;
  ShrinkageTracker tracker(mu_hat, schedule);
  while (tracker.t() < t_max) {
    tracker.advance();
    TraceRow row;
    row.t = tracker.t();
    row.eta = tracker.eta();
    const double sd = tracker.null_sd();
    row.separation2 = 1.0 / row.eta + sd;
    const auto [bias, threshold] = sides(tracker, sd);
    row.bias_side = bias;
    row.threshold_side = threshold;
    d.trace.push_back(row);
    if (bias < threshold) {
      d.T = row.t;
      d.eta_T = row.eta;
      finish(d, mu_hat, population);
      return d;
    }
  }
  d.T = t_max;
  d.eta_T = schedule.eta(t_max);
  throw HorizonExhausted(std::move(d));
}

std::vector<std::size_t> bootstrap_indices(std::size_t n, std::uint64_t seed, int b) {
  Rng rng = make_rng(seed, {stream::kBootstrap, static_cast<std::uint64_t>(b)});
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

struct BootstrapSample {
  std::vector<double> x;
  Eigen::VectorXd y;
};

BootstrapSample draw_sample(const Dataset& data, std::uint64_t seed, int b) {
  const auto idx = bootstrap_indices(data.n(), seed, b);
  BootstrapSample out;
  out.x.resize(idx.size());
  out.y.resize(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.x[i] = data.x[idx[i]];
    out.y(static_cast<Eigen::Index>(i)) = data.y[idx[i]];
  }
  return out;
}

// Leading-eigenvalue input for the bootstrap sample's own capped schedule.
// Any value <= 1 gives the same cap, so the Gershgorin row-sum bound avoids
// the eigen solve for kernels bounded by 1.
double leading_eigenvalue_for_cap(const Eigen::MatrixXd& matrix) {
  const double gershgorin = matrix.cwiseAbs().rowwise().sum().maxCoeff();
  if (gershgorin <= 1.0) return gershgorin;
  return top_eigenvalue(matrix);
}

void check_bootstrap_inputs(const Dataset& data, const EmpiricalKernelEigen& eigs,
                            const BootstrapConfig& cfg) {
  data.validate();
  cfg.validate();
  if (eigs.n() != data.n()) throw std::invalid_argument("eigensystem does not match the dataset");
}

}  // namespace

std::string rule_name(StoppingRule rule) {
  switch (rule) {
    case StoppingRule::Testing: return "testing";
    case StoppingRule::Estimation: return "estimation";
    case StoppingRule::Oracle: return "oracle";
    case StoppingRule::Bootstrap: return "bootstrap";
  }
  return "unknown";
}

HorizonExhausted::HorizonExhausted(StoppingDiagnostics diagnostics)
    : std::runtime_error("stopping rule '" + rule_name(diagnostics.rule) +
                         "' did not cross within t_max=" + std::to_string(diagnostics.T)),
      diagnostics_(std::move(diagnostics)) {}

void BootstrapConfig::validate() const {
  if (B < 1) throw std::invalid_argument("bootstrap B must be >= 1");
  if (t_max < 0) throw std::invalid_argument("bootstrap t_max must be >= 1 (or 0 for default)");
}

int default_horizon(std::size_t n, const StepSchedule& schedule) {
  return static_cast<int>(std::ceil(50.0 * static_cast<double>(n) / schedule.alpha()));
}

StoppingDiagnostics stop_rule_testing(std::span<const double> mu_hat, const StepSchedule& schedule,
                                      double noise_sd, int t_max,
                                      const std::optional<DecayModel>& population) {
  if (!(noise_sd > 0.0)) throw std::invalid_argument("noise_sd must be > 0");
  const double n = static_cast<double>(mu_hat.size());
  return first_crossing(StoppingRule::Testing, mu_hat, schedule, t_max, population,
                        [&](const ShrinkageTracker& tr, double) {
                          const double eta = tr.eta();
                          return std::pair{1.0 / eta, noise_sd / n * std::sqrt(effective_dimension(mu_hat, eta))};
                        });
}

StoppingDiagnostics stop_rule_estimation(std::span<const double> mu_hat, const StepSchedule& schedule,
                                         double noise_sd, int t_max,
                                         const std::optional<DecayModel>& population) {
  if (!(noise_sd > 0.0)) throw std::invalid_argument("noise_sd must be > 0");
  const double n = static_cast<double>(mu_hat.size());
  return first_crossing(StoppingRule::Estimation, mu_hat, schedule, t_max, population,
                        [&](const ShrinkageTracker& tr, double) {
                          const double eta = tr.eta();
                          return std::pair{1.0 / eta, noise_sd / n * effective_dimension(mu_hat, eta)};
                        });
}

StoppingDiagnostics stop_rule_oracle(const EmpiricalKernelEigen& eigs, const StepSchedule& schedule,
                                     std::span<const double> f_star_values, int t_max) {
  if (f_star_values.size() != eigs.n()) throw std::invalid_argument("f* length does not match n");
  const Eigen::Map<const Eigen::VectorXd> f_star(f_star_values.data(),
                                                 static_cast<Eigen::Index>(f_star_values.size()));
  const Eigen::ArrayXd g2 = (eigs.U().transpose() * f_star).array().square();
  const double n = static_cast<double>(eigs.n());
  return first_crossing(StoppingRule::Oracle, eigs.eigenvalues(), schedule, t_max, std::nullopt,
                        [&](const ShrinkageTracker& tr, double sd) {
                          return std::pair{(tr.s().array().square() * g2).sum() / n, sd};
                        });
}

StoppingDiagnostics stop_rule_bootstrap(const Dataset& data, const KernelSpec& spec,
                                        const EmpiricalKernelEigen& eigs, const StepSchedule& schedule,
                                        const BootstrapConfig& cfg) {
  check_bootstrap_inputs(data, eigs, cfg);
  const std::size_t n = data.n();
  const int t_max = cfg.t_max > 0 ? cfg.t_max : default_horizon(n, schedule);

  // Per replicate: the bootstrap kernel matrix drives its own recursion; the
  // cross-kernel maps its representer coefficients to the original design.
  struct Replicate {
    Eigen::MatrixXd matrix;
    Eigen::MatrixXd cross;
    std::optional<GradientDescent> gd;
  };
  std::vector<Replicate> reps(static_cast<std::size_t>(cfg.B));
  for (int b = 0; b < cfg.B; ++b) {
    BootstrapSample sample = draw_sample(data, cfg.seed, b);
    Replicate& r = reps[static_cast<std::size_t>(b)];
    r.matrix = empirical_kernel_matrix(spec, sample.x);
    r.cross = cross_kernel(spec, data.x, sample.x);
    const StepSchedule own =
        StepSchedule::constant(leading_eigenvalue_for_cap(r.matrix), schedule.requested());
    r.gd.emplace(r.matrix, std::move(sample.y), own);
  }

  const double dn = static_cast<double>(n);
  Eigen::VectorXd averaged(static_cast<Eigen::Index>(n));
  return first_crossing(StoppingRule::Bootstrap, eigs.eigenvalues(), schedule, t_max, std::nullopt,
                        [&](const ShrinkageTracker& tr, double sd) {
                          averaged.setZero();
                          for (Replicate& r : reps) {
                            while (r.gd->t() < tr.t()) r.gd->step();
                            averaged.noalias() += r.cross * r.gd->coeffs();
                          }
                          averaged /= static_cast<double>(cfg.B);
                          const Eigen::VectorXd proj = eigs.U().transpose() * averaged;
                          const double bias = (tr.s().array() * proj.array()).square().sum() / dn;
                          return std::pair{bias, sd};
                        });
}

StoppingDiagnostics stop_rule_bootstrap(const Dataset& data, const KernelSpec& spec,
                                        const StepSchedule& schedule, const BootstrapConfig& cfg) {
  const EmpiricalKernelEigen eigs = build_empirical_kernel(spec, data.x);
  return stop_rule_bootstrap(data, spec, eigs, schedule, cfg);
}

double bootstrap_bias_proxy_reference(const Dataset& data, const KernelSpec& spec,
                                      const EmpiricalKernelEigen& eigs, const StepSchedule& schedule,
                                      const BootstrapConfig& cfg, int t) {
  check_bootstrap_inputs(data, eigs, cfg);
  const std::size_t n = data.n();
  Eigen::VectorXd averaged = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (int b = 0; b < cfg.B; ++b) {
    BootstrapSample sample = draw_sample(data, cfg.seed, b);
    const EmpiricalKernelEigen boot = build_empirical_kernel(spec, sample.x);
    const StepSchedule own = make_schedule(boot, schedule.requested());
    const auto states = run_trajectory(boot, sample.y, own, t);
    const Eigen::VectorXd& c = states.back().coeffs;
    const std::span<const double> coeffs(c.data(), static_cast<std::size_t>(c.size()));
    for (std::size_t i = 0; i < n; ++i) {
      averaged(static_cast<Eigen::Index>(i)) += evaluate_function(coeffs, spec, sample.x, data.x[i]);
    }
  }
  averaged /= static_cast<double>(cfg.B);
  const ShrinkageDiagonal shrink = shrinkage_diagonal(eigs.eigenvalues(), schedule, t);
  const Eigen::VectorXd proj = eigs.U().transpose() * averaged;
  return (shrink.s.array() * proj.array()).square().sum() / static_cast<double>(n);
}

}  // namespace earlystop
