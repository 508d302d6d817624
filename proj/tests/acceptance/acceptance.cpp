// One PASS/FAIL line per criterion. `--criterion N` runs a single one; no
// argument runs all of them. Exit status is non-zero if any selected criterion fails.

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "earlystop/harness.hpp"
#include "earlystop/random.hpp"
#include "earlystop/report_io.hpp"
#include "earlystop/ridge.hpp"
#include "earlystop/stopping.hpp"
#include "test_support.hpp"

using namespace earlystop;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

constexpr std::uint64_t kSeed = 20240501;

// ---------------------------------------------------------------- 1
Outcome spectral_equivalence() {
  std::mt19937_64 rng(kSeed);
  double worst = 0.0;
  for (int instance = 0; instance < 50; ++instance) {
    const std::size_t n = 2 + rng() % 63;
    const KernelSpec spec = instance % 2 ? KernelSpec::sobolev(2) : KernelSpec::gaussian_bandwidth(0.05 + 0.5 * (rng() % 100) / 100.0);
    const auto x = testsupport::uniform_design(n, rng());
    const Eigen::VectorXd y = testsupport::normal_vector(n, rng());
    const auto eigs = build_empirical_kernel(spec, x);
    const Eigen::MatrixXd matrix = empirical_kernel_matrix(spec, x);
    const StepSchedule schedule = make_schedule(eigs);
    const int t_max = 1 + static_cast<int>(rng() % 500);
    GradientDescent gd(matrix, y, schedule);
    for (int t = 1; t <= t_max; ++t) {
      gd.step();
      const Eigen::VectorXd closed = spectral_fitted_values(eigs, y, schedule, t);
      worst = std::max(worst, (gd.fitted() - closed).cwiseAbs().maxCoeff());
    }
  }
  return {worst <= 1e-8, fmt::format("max |iterative - closed form| = {:.3e} (tol 1e-8, 50 instances)", worst)};
}

// ---------------------------------------------------------------- 2
Outcome shrinkage_band() {
  std::mt19937_64 rng(kSeed + 2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // At t = 1 the upper band is an equality and 1 - (1 - a) rounds to a
  // within an ulp of 1, so comparisons get that much slack and no more.
  constexpr double kUlps = 4.0 * std::numeric_limits<double>::epsilon();
  int violations = 0;
  double min_x = 1e300, max_x = 0.0, overshoot = 0.0;
  for (int i = 0; i < 1000; ++i) {
    // Target eta * mu log-uniform on [1e-3, 1e3], then realise it with an
    // integer t and a step that respects the cap alpha * mu <= 1.
    const double x = std::pow(10.0, -3.0 + 6.0 * u(rng));
    const int t = std::max(1, static_cast<int>(std::ceil(x))) + static_cast<int>(rng() % 50);
    const double alpha = 0.05 + 0.95 * u(rng);
    const double mu = x / (alpha * t);
    const StepSchedule schedule = StepSchedule::constant(std::max(mu, 1.0), alpha);
    const std::vector<double> mu_hat{mu};
    const double s = shrinkage_diagonal(mu_hat, schedule, t).s[0];
    const double prod = schedule.eta(t) * mu;
    min_x = std::min(min_x, prod);
    max_x = std::max(max_x, prod);
    const double band = std::min(1.0, prod);
    const double gaps[] = {s * s - 1.0 / (2.0 * std::exp(1.0) * prod), 0.5 * band - (1.0 - s), (1.0 - s) - band};
    bool ok = s >= 0.0;
    for (double g : gaps) {
      overshoot = std::max(overshoot, g);
      ok = ok && g <= kUlps;
    }
    violations += !ok;
  }
  return {violations == 0, fmt::format("violations = {} of 1000 (largest overshoot {:.2e}, slack {:.2e}), eta*mu in [{:.3e}, {:.3e}]",
                                       violations, overshoot, kUlps, min_x, max_x)};
}

// ---------------------------------------------------------------- 3
// Fixed design, fresh noise: the null moments are conditional on the design.
Outcome null_calibration() {
  const std::size_t n = 500;
  const int R = 2000;
  const KernelSpec kernel = experiment_kernel(KernelFamily::GaussianEDK);
  const Dataset design = generate_dataset(SignalModel{}, n, 1.0, derive_seed(kSeed, {3}));
  const auto eigs = build_empirical_kernel(kernel, design.x);
  const StepSchedule schedule = make_schedule(eigs);
  const int T = stop_rule_testing(eigs.eigenvalues(), schedule, 1.0, default_horizon(n, schedule)).T;
  const ShrinkageDiagonal shrink = shrinkage_diagonal(eigs.eigenvalues(), schedule, T);
  const NullMoments m = null_moments(shrink);
  const Eigen::VectorXd w = (1.0 - shrink.s.array()).square().matrix();
  const double dof = w.sum() * w.sum() / w.squaredNorm();

  std::mt19937_64 rng(derive_seed(kSeed, {3, stream::kData}));
  std::normal_distribution<double> z;
  std::vector<double> d(R), standardized(R);
  Eigen::VectorXd eps(static_cast<Eigen::Index>(n));
  for (int r = 0; r < R; ++r) {
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps[i] = z(rng);
    const Eigen::VectorXd f = spectral_fitted_values(eigs, eps, schedule, T);
    d[r] = test_statistic(f);
    standardized[r] = (d[r] - m.mu) / m.sigma;
  }
  double mean = 0.0;
  for (double v : d) mean += v / R;
  double var = 0.0;
  for (double v : d) var += (v - mean) * (v - mean) / (R - 1);
  const double sd = std::sqrt(var);
  const double se = sd / std::sqrt(static_cast<double>(R));
  const auto ks = testsupport::ks_standard_normal(standardized);
  const bool ks_ok = ks.p_value >= 0.01;
  const bool mean_ok = std::abs(mean - m.mu) <= 4.0 * se;
  const bool sd_ok = std::abs(sd - m.sigma) <= 0.1 * m.sigma;
  return {ks_ok && mean_ok && sd_ok,
          fmt::format("T*={} effective_dof={:.2f} KS D={:.4f} p={:.3g} ({}); mean {:.6g} vs mu {:.6g}, "
                      "|diff|/se={:.2f} ({}); sd {:.6g} vs sigma {:.6g}, rel={:.3f} ({})",
                      T, dof, ks.statistic, ks.p_value, ks_ok ? "ok" : "fail", mean, m.mu,
                      std::abs(mean - m.mu) / se, mean_ok ? "ok" : "fail", sd, m.sigma,
                      std::abs(sd - m.sigma) / m.sigma, sd_ok ? "ok" : "fail")};
}

ExperimentConfig mcos_config(double c, std::vector<std::size_t> n, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.signal = SignalModel{SignalId::MCos, c};
  cfg.kernel = experiment_kernel(KernelFamily::GaussianEDK);
  cfg.n_grid = std::move(n);
  cfg.replicates = 500;
  cfg.level = 0.05;
  cfg.methods = {Method::ES, Method::OracleES, Method::PenalizedCV};
  cfg.seed = seed;
  return cfg;
}

std::string describe(const std::vector<CellRecord>& cells) {
  std::string out;
  for (const CellRecord& c : cells) {
    out += fmt::format("{}{}@n={}{}: {:.3f}{}", out.empty() ? "" : ", ", c.method, c.n,
                       c.gamma ? fmt::format(",gamma={:.3f}", *c.gamma) : "", c.rate,
                       c.valid() ? "" : fmt::format(" (invalid, {} failures)", c.failures));
  }
  return out;
}

// ---------------------------------------------------------------- 4
Outcome empirical_size() {
  const auto cells = run_size_power(mcos_config(0.0, {200, 500}, kSeed + 4)).cells;
  bool pass = true;
  for (const CellRecord& c : cells) pass = pass && c.valid() && c.rate >= 0.02 && c.rate <= 0.09;
  return {pass, "rates in [0.02, 0.09]: " + describe(cells)};
}

// ---------------------------------------------------------------- 5
Outcome power_ordering() {
  const auto cells = run_size_power(mcos_config(1.0, {500}, kSeed + 5)).cells;
  std::map<std::string, double> rate;
  bool valid = true;
  for (const CellRecord& c : cells) {
    rate[c.method] = c.rate;
    valid = valid && c.valid();
  }
  const double es = rate["ES"], oracle = rate["OracleES"], cv = rate["PenalizedCV"];
  const bool pass = valid && es >= cv - 0.03 && std::abs(es - oracle) <= 0.1;
  return {pass, fmt::format("ES {:.3f} >= CV {:.3f} - 0.03; |ES - Oracle {:.3f}| = {:.3f} <= 0.1", es, cv, oracle,
                            std::abs(es - oracle))};
}

// ---------------------------------------------------------------- 6
Outcome sharpness_sweep() {
  ExperimentConfig cfg;
  cfg.kernel = KernelSpec::sobolev(2);
  cfg.n_grid = {1000};
  cfg.replicates = 500;
  cfg.gammas = {2.0 / 3.0, 1.0, 4.0 / 3.0};
  cfg.seed = kSeed + 6;
  cfg.signal = SignalModel{SignalId::MMix, 1.0};
  const auto power = run_gamma_sweep(cfg).cells;
  cfg.signal = SignalModel{SignalId::MMix, 0.0};
  const auto size = run_gamma_sweep(cfg).cells;
  const double low = power[0].rate, mid = power[1].rate, high = power[2].rate;
  bool pass = mid >= low - 0.02 && mid >= high - 0.02;
  for (const CellRecord& c : size) pass = pass && c.rate >= 0.02 && c.rate <= 0.09;
  return {pass, fmt::format("power {}; size {}", describe(power), describe(size))};
}

// ---------------------------------------------------------------- 7, 8
struct RateRow {
  std::size_t n;
  double mean_log_eta_star = 0.0;
  double mean_log_eta_tilde = 0.0;
  int violations = 0;
};

std::vector<RateRow> rate_sweep(const KernelSpec& kernel, const std::vector<std::size_t>& ns) {
  std::vector<RateRow> rows;
  for (std::size_t n : ns) {
    RateRow row{n};
    for (int s = 0; s < 5; ++s) {
      const Dataset d = generate_dataset(SignalModel{}, n, 1.0, derive_seed(kSeed + 7, {n, static_cast<std::uint64_t>(s)}));
      const std::vector<double> mu = empirical_spectrum(kernel, d.x);
      const StepSchedule schedule = StepSchedule::constant(mu[0]);
      const int horizon = default_horizon(n, schedule);
      const auto star = stop_rule_testing(mu, schedule, 1.0, horizon);
      const auto tilde = stop_rule_estimation(mu, schedule, 1.0, horizon);
      row.mean_log_eta_star += std::log(star.eta_T) / 5.0;
      row.mean_log_eta_tilde += std::log(tilde.eta_T) / 5.0;
      row.violations += tilde.T > star.T;
    }
    rows.push_back(row);
  }
  return rows;
}

const std::vector<std::size_t> kSobolevGrid{128, 256, 512, 1024, 2048, 4096};
const std::vector<std::size_t> kGaussianGrid{128, 256, 512, 1024};

Outcome sobolev_rate() {
  const auto rows = rate_sweep(KernelSpec::sobolev(2), kSobolevGrid);
  std::vector<double> x, y;
  for (const RateRow& r : rows) {
    x.push_back(std::log(static_cast<double>(r.n)));
    y.push_back(r.mean_log_eta_star);
  }
  const double slope = testsupport::ls_slope(x, y);
  return {std::abs(slope - 8.0 / 9.0) <= 0.08, fmt::format("slope of log eta_T* = {:.4f} (target 0.8889 +- 0.08)", slope)};
}

Outcome estimation_first() {
  int violations = 0, instances = 0;
  std::string per;
  const auto add = [&](const std::string& name, const KernelSpec& k, const std::vector<std::size_t>& ns) {
    int v = 0;
    for (const RateRow& r : rate_sweep(k, ns)) v += r.violations;
    violations += v;
    instances += 5 * static_cast<int>(ns.size());
    per += fmt::format("{}{}: {}", per.empty() ? "" : ", ", name, v);
  };
  add("sobolev2", KernelSpec::sobolev(2), kSobolevGrid);
  add("gaussian(h=0.1)", experiment_kernel(KernelFamily::GaussianEDK), kGaussianGrid);
  add("gaussian(denom=2)", KernelSpec::gaussian(), kGaussianGrid);
  return {violations == 0, fmt::format("T~ > T* on {} of {} instances ({})", violations, instances, per)};
}

// ---------------------------------------------------------------- 9
Outcome power_parabola() {
  ExperimentConfig cfg;
  cfg.signal = SignalModel{SignalId::MSmooth, 0.0};
  cfg.kernel = experiment_kernel(KernelFamily::GaussianEDK);
  cfg.n_grid = {200};
  cfg.replicates = 500;
  cfg.alpha = 1.0;
  cfg.seed = kSeed + 9;
  int t_max = 1000;
  SimulationReport report = run_iteration_curves(cfg, t_max);
  int ten_t = static_cast<int>(std::lround(10.0 * report.curve_summary->mean_T_star));
  if (ten_t > t_max) {
    t_max = ten_t;
    report = run_iteration_curves(cfg, t_max);
    ten_t = static_cast<int>(std::lround(10.0 * report.curve_summary->mean_T_star));
  }
  const CurveSummary& s = *report.curve_summary;
  const double best = *report.curves[static_cast<std::size_t>(s.argmax_power_t)].power;
  const double first = *report.curves[1].power;
  const double late = *report.curves[static_cast<std::size_t>(ten_t)].power;
  const bool pass = s.argmin_mse_t <= s.argmax_power_t && best - first >= 0.1 && best - late >= 0.1;
  return {pass, fmt::format("argmin MSE t={} argmax power t={} mean T*={:.2f}; power max {:.3f}, t=1 {:.3f}, "
                            "t=10T*={} {:.3f}; margins {:.3f} / {:.3f} (need 0.1)",
                            s.argmin_mse_t, s.argmax_power_t, s.mean_T_star, best, first, ten_t, late, best - first,
                            best - late)};
}

// ---------------------------------------------------------------- 10
Outcome ridge_connection() {
  int matched_in = 0, mismatched_out = 0, instances = 0;
  double lo = 1e300, hi = 0.0;
  for (const KernelSpec& kernel :
       {experiment_kernel(KernelFamily::GaussianEDK), KernelSpec::gaussian(), KernelSpec::sobolev(2)}) {
    for (std::size_t n : {50, 100, 200, 400, 800}) {
      const Dataset d = generate_dataset(SignalModel{}, n, 1.0, derive_seed(kSeed + 10, {n}));
      const std::vector<double> mu = empirical_spectrum(kernel, d.x);
      const StepSchedule schedule = StepSchedule::constant(mu[0]);
      const int horizon = default_horizon(n, schedule);
      for (int t : {stop_rule_estimation(mu, schedule, 1.0, horizon).T, stop_rule_testing(mu, schedule, 1.0, horizon).T}) {
        const double eta = schedule.eta(t);
        const double matched = connection_ratio(mu, schedule, t, 1.0 / eta);
        const double off = connection_ratio(mu, schedule, t, 1e3 / eta);
        lo = std::min(lo, matched);
        hi = std::max(hi, matched);
        matched_in += matched >= 0.125 && matched <= 8.0;
        mismatched_out += !(off >= 0.125 && off <= 8.0);
        ++instances;
      }
    }
  }
  const bool pass = matched_in == instances && mismatched_out * 10 >= instances * 9;
  return {pass, fmt::format("lambda=1/eta: {}/{} in [1/8, 8] (range {:.3f}..{:.3f}); lambda=1e3/eta: {}/{} outside",
                            matched_in, instances, lo, hi, mismatched_out, instances)};
}

// ---------------------------------------------------------------- 11
std::string run_cli(const std::vector<std::string>& args, int& code) {
  std::vector<const char*> argv{"earlystop"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return out.str();
}

Outcome cli_determinism() {
  const auto dataset = std::filesystem::temp_directory_path() / "earlystop_acceptance_data.csv";
  {
    std::ofstream os(dataset);
    write_dataset_csv(os, generate_dataset(SignalModel{SignalId::MCos, 1.0}, 80, 1.0, kSeed));
  }
  const std::vector<std::pair<std::string, std::vector<std::string>>> commands{
      {"simulate", {"simulate", "--n", "40,60", "--replicates", "5", "--c", "1", "--seed", "7"}},
      {"curves", {"curves", "--n", "50", "--replicates", "5", "--signal", "msmooth", "--seed", "7"}},
      {"sweep", {"sweep", "--n", "60", "--replicates", "5", "--kernel", "sobolev2", "--signal", "mmix", "--c", "1",
                 "--gamma", "2/3,1,4/3", "--seed", "7"}},
      {"compare", {"compare", "--n", "50", "--replicates", "5", "--c", "1", "--seed", "7"}},
      {"stop", {"stop", "--dataset", dataset.string(), "--rule", "bootstrap", "--seed", "7"}},
  };
  bool pass = true;
  std::string detail;
  for (const auto& [name, args] : commands) {
    int c1 = 0, c2 = 0;
    const std::string a = run_cli(args, c1);
    const std::string b = run_cli(args, c2);
    const bool same = c1 == 0 && c2 == 0 && !a.empty() && a == b;
    pass = pass && same;
    detail += fmt::format("{}{} {} ({} bytes)", detail.empty() ? "" : ", ", name, same ? "identical" : "DIFFERENT",
                          a.size());
  }
  std::filesystem::remove(dataset);
  return {pass, detail};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "spectral oracle equivalence", spectral_equivalence},
      {2, "shrinkage band", shrinkage_band},
      {3, "null calibration", null_calibration},
      {4, "empirical size", empirical_size},
      {5, "power ordering", power_ordering},
      {6, "sharpness sweep", sharpness_sweep},
      {7, "Sobolev testing rate", sobolev_rate},
      {8, "estimation stops before testing", estimation_first},
      {9, "power parabola", power_parabola},
      {10, "ridge connection", ridge_connection},
      {11, "CLI determinism", cli_determinism},
  };
  int selected = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--criterion" && i + 1 < argc) {
      selected = std::atoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: %s [--criterion N]\n", argv[0]);
      return 2;
    }
  }
  bool ok = true;
  bool ran = false;
  for (const Criterion& c : all) {
    if (selected != 0 && c.id != selected) continue;
    ran = true;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s criterion %d (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    ok = ok && o.pass;
  }
  if (!ran) {
    std::fprintf(stderr, "no criterion %d\n", selected);
    return 2;
  }
  return ok ? 0 : 1;
}
