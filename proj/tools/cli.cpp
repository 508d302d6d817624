#include "cli.hpp"

#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "earlystop/harness.hpp"
#include "earlystop/report_io.hpp"
#include "earlystop/stopping.hpp"

namespace earlystop::cli {

namespace {

// Accepts plain decimals and simple fractions such as "2/3".
double parse_gamma(const std::string& text) {
  const auto slash = text.find('/');
  std::size_t used = 0;
  if (slash == std::string::npos) {
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument("bad gamma '" + text + "'");
    return v;
  }
  const std::string num = text.substr(0, slash);
  const std::string den = text.substr(slash + 1);
  const double a = std::stod(num, &used);
  if (used != num.size()) throw std::invalid_argument("bad gamma '" + text + "'");
  const double b = std::stod(den, &used);
  if (used != den.size() || b == 0.0) throw std::invalid_argument("bad gamma '" + text + "'");
  return a / b;
}

KernelSpec kernel_from_flag(const std::string& name, double bandwidth) {
  if (name == "gaussian") return KernelSpec::gaussian_bandwidth(bandwidth);
  if (name == "sobolev2") return KernelSpec::sobolev(2);
  throw std::invalid_argument("unknown kernel '" + name + "'");
}

StoppingRule parse_rule(const std::string& name) {
  if (name == "testing") return StoppingRule::Testing;
  if (name == "estimation") return StoppingRule::Estimation;
  if (name == "oracle") return StoppingRule::Oracle;
  if (name == "bootstrap") return StoppingRule::Bootstrap;
  throw std::invalid_argument("unknown rule '" + name + "'");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Flags {
  std::string config;
  std::string kernel = "gaussian";
  double bandwidth = kExperimentGaussianBandwidth;
  std::string signal = "mcos";
  double c = 0.0;
  std::vector<std::size_t> n{200};
  int replicates = 500;
  double level = 0.05;
  std::string alpha = "auto";
  double sigma = 1.0;
  int bootstrap_b = 10;
  std::vector<std::string> gamma;
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "csv";
  int threads = 1;
  std::vector<std::string> methods;
  bool timing = false;
  int t_max = 0;
  std::string dataset;
  std::string rule = "testing";

  // Options whose presence overrides the config file.
  CLI::Option* o_kernel = nullptr;
  CLI::Option* o_bandwidth = nullptr;
  CLI::Option* o_signal = nullptr;
  CLI::Option* o_c = nullptr;
  CLI::Option* o_n = nullptr;
  CLI::Option* o_replicates = nullptr;
  CLI::Option* o_level = nullptr;
  CLI::Option* o_alpha = nullptr;
  CLI::Option* o_sigma = nullptr;
  CLI::Option* o_bootstrap_b = nullptr;
  CLI::Option* o_gamma = nullptr;
  CLI::Option* o_seed = nullptr;
  CLI::Option* o_threads = nullptr;
  CLI::Option* o_methods = nullptr;
};

void add_common(CLI::App& sub, Flags& f, bool experiment) {
  f.o_kernel = sub.add_option("--kernel", f.kernel, "Kernel")
                   ->check(CLI::IsMember({"gaussian", "sobolev2"}))
                   ->capture_default_str();
  f.o_bandwidth = sub.add_option("--bandwidth", f.bandwidth, "Gaussian bandwidth h in exp(-(x-x')^2/(2h^2))")
                      ->check(CLI::PositiveNumber)
                      ->capture_default_str();
  f.o_signal = sub.add_option("--signal", f.signal, "Regression function")
                   ->check(CLI::IsMember({"mcos", "mmix", "msmooth", "mkink"}))
                   ->capture_default_str();
  f.o_c = sub.add_option("--c", f.c, "Signal strength")->check(CLI::NonNegativeNumber)->capture_default_str();
  f.o_alpha = sub.add_option("--alpha-step", f.alpha, "Constant step size or 'auto'")->capture_default_str();
  f.o_sigma = sub.add_option("--sigma", f.sigma, "Noise standard deviation")
                  ->check(CLI::PositiveNumber)
                  ->capture_default_str();
  f.o_bootstrap_b = sub.add_option("--bootstrap-b", f.bootstrap_b, "Bootstrap resamples for the ES rule")
                        ->check(CLI::PositiveNumber)
                        ->capture_default_str();
  f.o_seed = sub.add_option("--seed", f.seed, "Master seed")->capture_default_str();
  sub.add_option("--out", f.out, "Output path (default stdout)");
  sub.add_option("--format", f.format, "Output format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  if (!experiment) return;
  sub.add_option("--config", f.config, "JSON experiment config; explicit flags override it");
  f.o_n = sub.add_option("--n", f.n, "Sample sizes (comma list)")->delimiter(',')->capture_default_str();
  f.o_replicates = sub.add_option("--replicates", f.replicates, "Monte Carlo replicates")
                       ->check(CLI::PositiveNumber)
                       ->capture_default_str();
  f.o_level = sub.add_option("--level", f.level, "Test level")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  f.o_threads = sub.add_option("--threads", f.threads, "Worker threads")
                    ->check(CLI::PositiveNumber)
                    ->capture_default_str();
  sub.add_flag("--timing", f.timing, "Record wall_ms (output is then not reproducible byte for byte)");
}

std::optional<double> parse_alpha(const std::string& text) {
  if (text == "auto") return std::nullopt;
  std::size_t used = 0;
  const double v = std::stod(text, &used);
  if (used != text.size()) throw std::invalid_argument("bad --alpha-step '" + text + "'");
  return v;
}

ExperimentConfig build_config(const Flags& f, std::vector<Method> default_methods) {
  ExperimentConfig cfg;
  const bool from_file = !f.config.empty();
  if (from_file) {
    cfg = config_from_json(read_file(f.config));
  } else {
    cfg.methods = std::move(default_methods);
  }
  auto given = [&](CLI::Option* o) { return !from_file || (o != nullptr && o->count() > 0); };
  const bool kernel_flag = f.o_kernel != nullptr && f.o_kernel->count() > 0;
  const bool bandwidth_flag = f.o_bandwidth != nullptr && f.o_bandwidth->count() > 0;
  if (!from_file || kernel_flag || bandwidth_flag) {
    std::string family = f.kernel;
    if (from_file && !kernel_flag) family = cfg.kernel.family == KernelFamily::GaussianEDK ? "gaussian" : "sobolev2";
    cfg.kernel = kernel_from_flag(family, f.bandwidth);
  }
  if (given(f.o_signal)) cfg.signal.id = parse_signal(f.signal);
  if (given(f.o_c)) cfg.signal.c = f.c;
  if (given(f.o_n)) cfg.n_grid = f.n;
  if (given(f.o_replicates)) cfg.replicates = f.replicates;
  if (given(f.o_level)) cfg.level = f.level;
  if (given(f.o_alpha)) cfg.alpha = parse_alpha(f.alpha);
  if (given(f.o_sigma)) cfg.noise_sd = f.sigma;
  if (given(f.o_bootstrap_b)) cfg.bootstrap.B = f.bootstrap_b;
  if (given(f.o_seed)) cfg.seed = f.seed;
  if (given(f.o_threads)) cfg.threads = f.threads;
  if (f.o_gamma != nullptr && given(f.o_gamma)) {
    cfg.gammas.clear();
    for (const std::string& g : f.gamma) cfg.gammas.push_back(parse_gamma(g));
  }
  if (f.o_methods && f.o_methods->count() > 0) {
    cfg.methods.clear();
    for (const std::string& m : f.methods) cfg.methods.push_back(parse_method(m));
  }
  cfg.validate();
  return cfg;
}

void emit(const Flags& f, std::ostream& out, const std::function<void(std::ostream&)>& writer) {
  if (f.out.empty()) {
    writer(out);
    return;
  }
  std::ofstream file(f.out, std::ios::binary);
  if (!file) throw std::runtime_error("cannot write '" + f.out + "'");
  writer(file);
  if (!file) throw std::runtime_error("write to '" + f.out + "' failed");
}

void emit_cells(const Flags& f, std::ostream& out, const SimulationReport& report) {
  const CsvOptions opts{f.timing};
  emit(f, out, [&](std::ostream& os) {
    if (f.format == "json") {
      write_report_json(os, report, opts);
    } else {
      write_cells_csv(os, report, opts);
    }
  });
}

int run_stop(const Flags& f, std::ostream& out, std::ostream& err) {
  std::ifstream in(f.dataset);
  if (!in) throw std::runtime_error("cannot open dataset '" + f.dataset + "'");
  Dataset data = read_dataset_csv(in, f.sigma);
  const KernelSpec kernel = kernel_from_flag(f.kernel, f.bandwidth);
  const EmpiricalKernelEigen eigs = build_empirical_kernel(kernel, data.x);
  const StepSchedule schedule = make_schedule(eigs, parse_alpha(f.alpha));
  if (schedule.clipped()) err << "warning: step size clipped to " << format_number(schedule.alpha()) << '\n';
  const int horizon = f.t_max > 0 ? f.t_max : default_horizon(data.n(), schedule);
  const StoppingRule rule = parse_rule(f.rule);

  StoppingDiagnostics diag;
  bool exhausted = false;
  try {
    switch (rule) {
      case StoppingRule::Testing:
        diag = stop_rule_testing(eigs.eigenvalues(), schedule, f.sigma, horizon);
        break;
      case StoppingRule::Estimation:
        diag = stop_rule_estimation(eigs.eigenvalues(), schedule, f.sigma, horizon);
        break;
      case StoppingRule::Oracle: {
        if (f.o_signal == nullptr || f.o_signal->count() == 0) {
          throw std::invalid_argument("the oracle rule needs --signal (and --c) for the true function");
        }
        data.signal = SignalModel{parse_signal(f.signal), f.c};
        const std::vector<double> truth = data.truth();
        diag = stop_rule_oracle(eigs, schedule, truth, horizon);
        break;
      }
      case StoppingRule::Bootstrap: {
        BootstrapConfig bc;
        bc.B = f.bootstrap_b;
        bc.seed = f.seed;
        bc.t_max = horizon;
        diag = stop_rule_bootstrap(data, kernel, eigs, schedule, bc);
        break;
      }
    }
  } catch (const HorizonExhausted& e) {
    diag = e.diagnostics();
    exhausted = true;
  }
  emit(f, out, [&](std::ostream& os) {
    if (f.format == "json") {
      write_diagnostics_json(os, diag);
    } else {
      write_trace_csv(os, diag);
    }
  });
  if (exhausted) {
    err << "rule " << rule_name(rule) << " did not cross within t_max=" << horizon << '\n';
    return 3;
  }
  err << "rule=" << rule_name(rule) << " T=" << diag.T << " eta_T=" << format_number(diag.eta_T)
      << " kappa=" << diag.kappa_emp << '\n';
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Early-stopped kernel gradient descent testing"};
  app.require_subcommand(1);

  CLI::App* simulate = app.add_subcommand("simulate", "Size/power grid");
  CLI::App* curves = app.add_subcommand("curves", "Per-iteration MSE and power");
  CLI::App* sweep = app.add_subcommand("sweep", "Forced-horizon gamma sweep");
  CLI::App* compare = app.add_subcommand("compare", "ES, OracleES and PenalizedCV on paired data");
  CLI::App* stop = app.add_subcommand("stop", "Stopping diagnosis for a dataset file");

  // One flag set per subcommand; only the active one is read after parsing.
  Flags fs, fc, fw, fm, ft;
  add_common(*simulate, fs, true);
  fs.o_methods = simulate->add_option("--methods", fs.methods, "Methods: es, oracle, cv")->delimiter(',');
  add_common(*curves, fc, true);
  curves->add_option("--t-max", fc.t_max, "Last iteration of the curves")->check(CLI::PositiveNumber);
  add_common(*sweep, fw, true);
  fw.o_gamma = sweep->add_option("--gamma", fw.gamma, "Horizon exponents (comma list, fractions allowed)")
                   ->delimiter(',');
  add_common(*compare, fm, true);
  fm.o_methods = compare->add_option("--methods", fm.methods, "Methods: es, oracle, cv")->delimiter(',');
  add_common(*stop, ft, false);
  stop->add_option("--dataset", ft.dataset, "CSV with columns x,y")->required()->check(CLI::ExistingFile);
  stop->add_option("--rule", ft.rule, "Stopping rule")
      ->check(CLI::IsMember({"testing", "estimation", "oracle", "bootstrap"}))
      ->capture_default_str();
  stop->add_option("--t-max", ft.t_max, "Iteration horizon (default ceil(50 n / alpha))")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*simulate) {
      const SimulationReport report = run_size_power(build_config(fs, {Method::ES}));
      emit_cells(fs, out, report);
    } else if (*compare) {
      const ExperimentConfig cfg =
          build_config(fm, {Method::ES, Method::OracleES, Method::PenalizedCV});
      emit_cells(fm, out, run_method_comparison(cfg));
    } else if (*sweep) {
      const ExperimentConfig cfg = build_config(fw, {Method::ES});
      if (cfg.gammas.empty()) throw std::invalid_argument("sweep needs --gamma");
      emit_cells(fw, out, run_gamma_sweep(cfg));
    } else if (*curves) {
      const ExperimentConfig cfg = build_config(fc, {Method::ES});
      const int t_max = fc.t_max > 0 ? fc.t_max : 100;
      const SimulationReport report = run_iteration_curves(cfg, t_max);
      emit(fc, out, [&](std::ostream& os) {
        if (fc.format == "json") {
          write_report_json(os, report, CsvOptions{fc.timing});
        } else {
          write_curves_csv(os, report);
        }
      });
      const CurveSummary& s = *report.curve_summary;
      err << "argmin_mse_t=" << s.argmin_mse_t << " argmax_power_t=" << s.argmax_power_t
          << " mean_T_star=" << format_number(s.mean_T_star) << " mean_T_tilde=" << format_number(s.mean_T_tilde)
          << '\n';
    } else if (*stop) {
      return run_stop(ft, out, err);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace earlystop::cli
