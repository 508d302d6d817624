#include "earlystop/harness.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <random>
#include <stdexcept>
#include <thread>
#include <tuple>

#include "earlystop/random.hpp"
#include "earlystop/ridge.hpp"

namespace earlystop {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

// FNV-1a; stable across platforms, unlike std::hash.
std::uint64_t stable_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string kernel_key(const KernelSpec& k) {
  if (k.family == KernelFamily::GaussianEDK) return fmt::format("gaussian:{:.17g}", k.bandwidth_denominator);
  return k.name();
}

/// Runs body(i) for i in [0, count) on `threads` workers. Each index is
/// processed exactly once; callers store results by index so the reduction
/// does not depend on scheduling.
template <class Body>
void parallel_for(int count, int threads, Body&& body) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int w = 0; w < threads; ++w) {
      pool.emplace_back([&] {
        for (int i = next++; i < count; i = next++) {
          try {
            body(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

struct ReplicateSetup {
  Dataset data;
  std::optional<EmpiricalKernelEigen> eigs;
  std::uint64_t seed = 0;
  double setup_ms = 0.0;
};

ReplicateSetup setup_replicate(const ExperimentConfig& cfg, std::size_t n, int r) {
  const auto start = Clock::now();
  ReplicateSetup s;
  s.seed = replicate_seed(cfg.seed, cfg.kernel, cfg.signal, n, r);
  s.data = generate_dataset(cfg.signal, n, cfg.noise_sd, s.seed);
  s.eigs.emplace(build_empirical_kernel(cfg.kernel, s.data.x));
  s.setup_ms = elapsed_ms(start);
  return s;
}

// D = (1/n) || (I - S) U^T y ||^2 using the eigen coordinates of y.
double statistic_from_projection(const Eigen::VectorXd& projected, const Eigen::VectorXd& s) {
  return ((1.0 - s.array()) * projected.array()).square().sum() / static_cast<double>(projected.size());
}

CellRecord base_cell(const ExperimentConfig& cfg, std::size_t n) {
  CellRecord c;
  c.kernel = cfg.kernel.name();
  c.signal = cfg.signal.name();
  c.c = cfg.signal.c;
  c.n = n;
  c.replicates = cfg.replicates;
  c.seed = cfg.seed;
  return c;
}

void add_metadata(SimulationReport& report, const ExperimentConfig& cfg) {
  report.metadata["rng"] = "mt19937_64 with libstdc++ uniform_real/normal distributions";
  report.metadata["seed_derivation"] = "splitmix64(master, fnv1a(kernel|signal|c|n), replicate)";
  report.metadata["kernel"] = kernel_key(cfg.kernel);
  report.metadata["noise_sd"] = fmt::format("{:.17g}", cfg.noise_sd);
  report.metadata["level"] = fmt::format("{:.17g}", cfg.level);
  report.metadata["alpha"] = cfg.alpha ? fmt::format("{:.17g}", *cfg.alpha) : "auto";
  report.metadata["bootstrap_B"] = std::to_string(cfg.bootstrap.B);
}

}  // namespace

KernelSpec experiment_kernel(KernelFamily family) {
  if (family == KernelFamily::GaussianEDK) return KernelSpec::gaussian_bandwidth(kExperimentGaussianBandwidth);
  return KernelSpec::sobolev(2);
}

std::string method_name(Method m) {
  switch (m) {
    case Method::ES: return "ES";
    case Method::OracleES: return "OracleES";
    case Method::PenalizedCV: return "PenalizedCV";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  if (name == "ES" || name == "es") return Method::ES;
  if (name == "OracleES" || name == "oracle") return Method::OracleES;
  if (name == "PenalizedCV" || name == "cv") return Method::PenalizedCV;
  throw std::invalid_argument("unknown method '" + name + "'");
}

void ExperimentConfig::validate() const {
  kernel.validate();
  if (replicates < 1) throw std::invalid_argument("replicates must be >= 1");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("level must be in (0, 1)");
  if (n_grid.empty()) throw std::invalid_argument("n grid must be non-empty");
  for (std::size_t n : n_grid) {
    if (n < 1) throw std::invalid_argument("n must be >= 1");
  }
  for (double g : gammas) {
    if (!(g > 0.0)) throw std::invalid_argument("gamma must be > 0");
  }
  if (!(signal.c >= 0.0)) throw std::invalid_argument("signal strength c must be >= 0");
  if (!(noise_sd > 0.0)) throw std::invalid_argument("noise_sd must be > 0");
  if (alpha && !(*alpha > 0.0)) throw std::invalid_argument("alpha must be > 0");
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  bootstrap.validate();
}

Dataset generate_dataset(const SignalModel& signal, std::size_t n, double noise_sd, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  if (!(noise_sd > 0.0)) throw std::invalid_argument("noise_sd must be > 0");
  Rng rng = make_rng(seed, {stream::kData});
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, noise_sd);
  Dataset d;
  d.noise_sd = noise_sd;
  d.signal = signal;
  d.x.resize(n);
  d.y.resize(n);
  for (auto& x : d.x) x = unif(rng);
  for (std::size_t i = 0; i < n; ++i) d.y[i] = signal(d.x[i]) + noise(rng);
  return d;
}

std::uint64_t replicate_seed(std::uint64_t master, const KernelSpec& kernel, const SignalModel& signal,
                             std::size_t n, int r) {
  const std::string cell = fmt::format("{}|{}|{:.17g}|{}", kernel_key(kernel), signal.name(), signal.c, n);
  return derive_seed(master, {stable_hash(cell), static_cast<std::uint64_t>(r)});
}

ReplicateOutcome run_method_once(Method method, const Dataset& data, const KernelSpec& kernel,
                                 const EmpiricalKernelEigen& eigs, const ExperimentConfig& cfg,
                                 std::uint64_t rep_seed) {
  ReplicateOutcome out;
  const double variance = cfg.noise_sd * cfg.noise_sd;
  const Eigen::Map<const Eigen::VectorXd> y(data.y.data(), static_cast<Eigen::Index>(data.n()));

  if (method == Method::PenalizedCV) {
    const auto grid = default_lambda_grid(eigs.eigenvalues());
    const double lambda =
        cv_select_lambda(data, kernel, grid, cfg.cv_folds, derive_seed(rep_seed, {stream::kFolds}));
    const RidgeFit fit = krr_fit(eigs, y, lambda);
    out.report = krr_wald_test(fit, variance, cfg.level);
    out.eta_or_inverse_lambda = 1.0 / lambda;
    return out;
  }

  const StepSchedule schedule = make_schedule(eigs, cfg.alpha);
  StoppingDiagnostics diag;
  try {
    if (method == Method::ES) {
      BootstrapConfig bc = cfg.bootstrap;
      bc.seed = derive_seed(rep_seed, {stream::kBootstrap});
      diag = stop_rule_bootstrap(data, kernel, eigs, schedule, bc);
    } else {
      const int horizon = cfg.bootstrap.t_max > 0 ? cfg.bootstrap.t_max : default_horizon(data.n(), schedule);
      const auto truth = data.truth();
      diag = stop_rule_oracle(eigs, schedule, truth, horizon);
    }
  } catch (const HorizonExhausted&) {
    out.failed = true;
    return out;
  }
  const ShrinkageDiagonal shrink = shrinkage_diagonal(eigs.eigenvalues(), schedule, diag.T);
  const Eigen::VectorXd projected = eigs.U().transpose() * y;
  out.report = wald_decision(statistic_from_projection(projected, shrink.s),
                             null_moments(shrink, variance), cfg.level);
  out.T = diag.T;
  out.eta_or_inverse_lambda = diag.eta_T;
  return out;
}

SimulationReport run_size_power(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.methods.empty()) throw std::invalid_argument("at least one method is required");
  SimulationReport report;
  add_metadata(report, cfg);
  const int R = cfg.replicates;
  const std::size_t M = cfg.methods.size();

  for (std::size_t n : cfg.n_grid) {
    std::vector<std::vector<ReplicateOutcome>> outcomes(M, std::vector<ReplicateOutcome>(static_cast<std::size_t>(R)));
    std::vector<std::vector<double>> times(M, std::vector<double>(static_cast<std::size_t>(R), 0.0));
    parallel_for(R, cfg.threads, [&](int r) {
      const ReplicateSetup setup = setup_replicate(cfg, n, r);
      for (std::size_t m = 0; m < M; ++m) {
        const auto start = Clock::now();
        outcomes[m][static_cast<std::size_t>(r)] = run_method_once(cfg.methods[m], setup.data, cfg.kernel, *setup.eigs, cfg, setup.seed);
        times[m][static_cast<std::size_t>(r)] = setup.setup_ms + elapsed_ms(start);
      }
    });
    for (std::size_t m = 0; m < M; ++m) {
      CellRecord cell = base_cell(cfg, n);
      cell.method = method_name(cfg.methods[m]);
      double sum_T = 0.0;
      double sum_eta = 0.0;
      int with_T = 0;
      int ok = 0;
      for (int r = 0; r < R; ++r) {
        const ReplicateOutcome& o = outcomes[m][static_cast<std::size_t>(r)];
        cell.wall_ms += times[m][static_cast<std::size_t>(r)];
        if (o.failed) {
          ++cell.failures;
          continue;
        }
        ++ok;
        if (o.report.reject()) ++cell.rejections;
        if (o.report.degenerate()) ++cell.degenerate;
        if (o.T) {
          sum_T += *o.T;
          ++with_T;
        }
        sum_eta += o.eta_or_inverse_lambda;
      }
      cell.rate = static_cast<double>(cell.rejections) / static_cast<double>(R);
      if (with_T > 0) cell.mean_T = sum_T / with_T;
      cell.mean_eta_T = ok > 0 ? sum_eta / ok : 0.0;
      report.cells.push_back(std::move(cell));
    }
  }
  sort_cells(report.cells);
  return report;
}

SimulationReport run_method_comparison(const ExperimentConfig& cfg) {
  ExperimentConfig copy = cfg;
  if (copy.methods.empty()) copy.methods = {Method::ES, Method::OracleES, Method::PenalizedCV};
  return run_size_power(copy);
}

SimulationReport run_iteration_curves(const ExperimentConfig& cfg, int t_max) {
  cfg.validate();
  if (cfg.n_grid.size() != 1) throw std::invalid_argument("iteration curves need exactly one n");
  if (t_max < 1) throw std::invalid_argument("t_max must be >= 1");
  const std::size_t n = cfg.n_grid.front();
  const int R = cfg.replicates;
  const auto T = static_cast<std::size_t>(t_max) + 1;
  const double variance = cfg.noise_sd * cfg.noise_sd;
  const double quantile = normal_quantile(1.0 - cfg.level / 2.0);

  struct PerReplicate {
    std::vector<double> mse, mu, sigma, eta;
    std::vector<char> reject;
    double t_star = 0.0, t_tilde = 0.0;
  };
  std::vector<PerReplicate> per(static_cast<std::size_t>(R));

  parallel_for(R, cfg.threads, [&](int r) {
    const ReplicateSetup setup = setup_replicate(cfg, n, r);
    const EmpiricalKernelEigen& eigs = *setup.eigs;
    const StepSchedule schedule = make_schedule(eigs, cfg.alpha);
    const Eigen::Map<const Eigen::VectorXd> y(setup.data.y.data(), static_cast<Eigen::Index>(n));
    const auto truth_v = setup.data.truth();
    const Eigen::Map<const Eigen::VectorXd> truth(truth_v.data(), static_cast<Eigen::Index>(n));
    const Eigen::ArrayXd gy = (eigs.U().transpose() * y).array();
    const Eigen::ArrayXd gf = (eigs.U().transpose() * truth).array();
    const double dn = static_cast<double>(n);

    PerReplicate& out = per[static_cast<std::size_t>(r)];
    out.mse.resize(T);
    out.mu.resize(T);
    out.sigma.resize(T);
    out.eta.resize(T);
    out.reject.resize(T);
    Eigen::ArrayXd s = Eigen::ArrayXd::Ones(static_cast<Eigen::Index>(n));
    const Eigen::ArrayXd factor = (1.0 - schedule.alpha() * eigs.mu_hat().array()).max(0.0);
    for (std::size_t t = 0; t < T; ++t) {
      if (t > 0) s *= factor;
      const Eigen::ArrayXd fitted = (1.0 - s) * gy;
      // U is orthogonal, so in-sample norms can be taken in eigen coordinates.
      out.mse[t] = (fitted - gf).square().sum() / dn;
      const double D = fitted.square().sum() / dn;
      const Eigen::ArrayXd one_minus = 1.0 - s;
      out.mu[t] = variance * one_minus.square().sum() / dn;
      out.sigma[t] = variance * std::sqrt(2.0 * one_minus.square().square().sum()) / dn;
      out.eta[t] = schedule.eta(static_cast<int>(t));
      out.reject[t] = out.sigma[t] > 0.0 && std::abs(D - out.mu[t]) >= quantile * out.sigma[t];
    }
    const int horizon = default_horizon(n, schedule);
    try {
      out.t_star = stop_rule_testing(eigs.eigenvalues(), schedule, cfg.noise_sd, horizon).T;
      out.t_tilde = stop_rule_estimation(eigs.eigenvalues(), schedule, cfg.noise_sd, horizon).T;
    } catch (const HorizonExhausted&) {
      out.t_star = out.t_tilde = std::nan("");
    }
  });

  SimulationReport report;
  add_metadata(report, cfg);
  report.metadata["n"] = std::to_string(n);
  report.metadata["signal"] = cfg.signal.name();
  CurveSummary summary;
  double best_mse = std::numeric_limits<double>::infinity();
  double best_power = -1.0;
  for (std::size_t t = 0; t < T; ++t) {
    CurveRow row;
    row.t = static_cast<int>(t);
    int rejections = 0;
    bool degenerate = false;
    for (const PerReplicate& p : per) {
      row.eta_t += p.eta[t];
      row.mse += p.mse[t];
      row.mu_nt += p.mu[t];
      row.sigma_nt += p.sigma[t];
      rejections += p.reject[t];
      degenerate = degenerate || !(p.sigma[t] > 0.0);
    }
    row.eta_t /= R;
    row.mse /= R;
    row.mu_nt /= R;
    row.sigma_nt /= R;
    if (!degenerate) row.power = static_cast<double>(rejections) / R;
    if (t >= 1) {
      if (row.mse < best_mse) {
        best_mse = row.mse;
        summary.argmin_mse_t = row.t;
      }
      if (row.power && *row.power > best_power) {
        best_power = *row.power;
        summary.argmax_power_t = row.t;
      }
    }
    report.curves.push_back(row);
  }
  for (const PerReplicate& p : per) {
    summary.mean_T_star += p.t_star;
    summary.mean_T_tilde += p.t_tilde;
  }
  summary.mean_T_star /= R;
  summary.mean_T_tilde /= R;
  report.curve_summary = summary;
  return report;
}

double sweep_base(const KernelSpec& kernel, std::size_t n) {
  const double dn = static_cast<double>(n);
  if (kernel.family == KernelFamily::PeriodicSobolevPDK) {
    const double m = kernel.order;
    return std::pow(dn, 4.0 * m / (4.0 * m + 1.0));
  }
  if (n < 3) throw std::invalid_argument("Gaussian sweep base needs n >= 3");
  return dn / std::pow(std::log(dn), 0.25);
}

SimulationReport run_gamma_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.gammas.empty()) throw std::invalid_argument("gamma sweep needs at least one gamma");
  SimulationReport report;
  add_metadata(report, cfg);
  const int R = cfg.replicates;
  const double variance = cfg.noise_sd * cfg.noise_sd;

  for (std::size_t n : cfg.n_grid) {
    const double base = sweep_base(cfg.kernel, n);
    std::vector<int> horizons;
    std::vector<bool> clamped;
    for (double g : cfg.gammas) {
      const double raw = std::round(std::pow(base, g));
      clamped.push_back(raw < 1.0);
      horizons.push_back(static_cast<int>(std::max(1.0, raw)));
    }
    const std::size_t G = cfg.gammas.size();
    std::vector<std::vector<TestReport>> reports(G, std::vector<TestReport>(static_cast<std::size_t>(R)));
    std::vector<std::vector<double>> etas(G, std::vector<double>(static_cast<std::size_t>(R)));
    std::vector<double> times(static_cast<std::size_t>(R));
    parallel_for(R, cfg.threads, [&](int r) {
      const auto start = Clock::now();
      const ReplicateSetup setup = setup_replicate(cfg, n, r);
      const EmpiricalKernelEigen& eigs = *setup.eigs;
      const StepSchedule schedule = make_schedule(eigs, cfg.alpha);
      const Eigen::Map<const Eigen::VectorXd> y(setup.data.y.data(), static_cast<Eigen::Index>(n));
      const Eigen::VectorXd projected = eigs.U().transpose() * y;
      for (std::size_t g = 0; g < G; ++g) {
        const ShrinkageDiagonal shrink = shrinkage_diagonal(eigs.eigenvalues(), schedule, horizons[g]);
        reports[g][static_cast<std::size_t>(r)] = wald_decision(
            statistic_from_projection(projected, shrink.s), null_moments(shrink, variance), cfg.level);
        etas[g][static_cast<std::size_t>(r)] = schedule.eta(horizons[g]);
      }
      times[static_cast<std::size_t>(r)] = elapsed_ms(start);
    });
    for (std::size_t g = 0; g < G; ++g) {
      CellRecord cell = base_cell(cfg, n);
      cell.method = "FixedT";
      cell.gamma = cfg.gammas[g];
      cell.horizon_clamped = clamped[g];
      cell.mean_T = horizons[g];
      for (int r = 0; r < R; ++r) {
        const TestReport& rep = reports[g][static_cast<std::size_t>(r)];
        if (rep.reject()) ++cell.rejections;
        if (rep.degenerate()) ++cell.degenerate;
        cell.mean_eta_T += etas[g][static_cast<std::size_t>(r)];
        cell.wall_ms += times[static_cast<std::size_t>(r)] / static_cast<double>(G);
      }
      cell.mean_eta_T /= R;
      cell.rate = static_cast<double>(cell.rejections) / R;
      report.cells.push_back(std::move(cell));
    }
  }
  sort_cells(report.cells);
  return report;
}

void sort_cells(std::vector<CellRecord>& cells) {
  std::stable_sort(cells.begin(), cells.end(), [](const CellRecord& a, const CellRecord& b) {
    const double ga = a.gamma.value_or(-1.0);
    const double gb = b.gamma.value_or(-1.0);
    return std::tie(a.method, a.kernel, a.signal, a.c, a.n, ga) <
           std::tie(b.method, b.kernel, b.signal, b.c, b.n, gb);
  });
}

}  // namespace earlystop
