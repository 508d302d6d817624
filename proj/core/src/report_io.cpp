#include "earlystop/report_io.hpp"

#include <fmt/format.h>

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace earlystop {

namespace {

using nlohmann::json;

std::string opt(const std::optional<double>& v) { return v ? format_number(*v) : std::string{}; }

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

json kernel_to_json(const KernelSpec& k) {
  json j;
  if (k.family == KernelFamily::GaussianEDK) {
    j["family"] = "gaussian";
    j["bandwidth_denominator"] = k.bandwidth_denominator;
  } else {
    j["family"] = "sobolev";
    j["order"] = k.order;
  }
  return j;
}

KernelSpec kernel_from_json(const json& j) {
  const std::string family = j.at("family").get<std::string>();
  if (family == "gaussian") return KernelSpec::gaussian(j.value("bandwidth_denominator", 2.0));
  if (family == "sobolev") return KernelSpec::sobolev(j.value("order", 2));
  throw std::invalid_argument("unknown kernel family '" + family + "'");
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  return fmt::format("{:.17g}", v);
}

void write_cells_csv(std::ostream& os, const SimulationReport& report, const CsvOptions& opts) {
  os << "method,kernel,signal,c,n,gamma,replicates,rejections,rate,mean_T,mean_eta_T,failures,wall_ms,seed\n";
  for (const CellRecord& c : report.cells) {
    os << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", c.method, c.kernel, c.signal,
                      format_number(c.c), c.n, opt(c.gamma), c.replicates, c.rejections,
                      format_number(c.rate), opt(c.mean_T), format_number(c.mean_eta_T), c.failures,
                      format_number(opts.include_timing ? c.wall_ms : 0.0), c.seed);
  }
}

void write_curves_csv(std::ostream& os, const SimulationReport& report) {
  os << "t,eta_t,mse,power,mu_nt,sigma_nt\n";
  for (const CurveRow& r : report.curves) {
    os << fmt::format("{},{},{},{},{},{}\n", r.t, format_number(r.eta_t), format_number(r.mse), opt(r.power),
                      format_number(r.mu_nt), format_number(r.sigma_nt));
  }
}

void write_trace_csv(std::ostream& os, const StoppingDiagnostics& diag) {
  os << "rule,t,eta_t,bias_side,threshold_side,separation2\n";
  const std::string rule = rule_name(diag.rule);
  for (const TraceRow& r : diag.trace) {
    os << fmt::format("{},{},{},{},{},{}\n", rule, r.t, format_number(r.eta), format_number(r.bias_side),
                      format_number(r.threshold_side), format_number(r.separation2));
  }
}

void write_report_json(std::ostream& os, const SimulationReport& report, const CsvOptions& opts) {
  json j;
  j["metadata"] = report.metadata;
  json cells = json::array();
  for (const CellRecord& c : report.cells) {
    cells.push_back({{"method", c.method},
                     {"kernel", c.kernel},
                     {"signal", c.signal},
                     {"c", c.c},
                     {"n", c.n},
                     {"gamma", opt_json(c.gamma)},
                     {"replicates", c.replicates},
                     {"rejections", c.rejections},
                     {"rate", c.rate},
                     {"mean_T", opt_json(c.mean_T)},
                     {"mean_eta_T", c.mean_eta_T},
                     {"failures", c.failures},
                     {"degenerate", c.degenerate},
                     {"valid", c.valid()},
                     {"horizon_clamped", c.horizon_clamped},
                     {"wall_ms", opts.include_timing ? c.wall_ms : 0.0},
                     {"seed", c.seed}});
  }
  j["cells"] = cells;
  if (!report.curves.empty()) {
    json rows = json::array();
    for (const CurveRow& r : report.curves) {
      rows.push_back({{"t", r.t},
                      {"eta_t", r.eta_t},
                      {"mse", r.mse},
                      {"power", opt_json(r.power)},
                      {"mu_nt", r.mu_nt},
                      {"sigma_nt", r.sigma_nt}});
    }
    j["curves"] = rows;
  }
  if (report.curve_summary) {
    const CurveSummary& s = *report.curve_summary;
    j["curve_summary"] = {{"argmin_mse_t", s.argmin_mse_t},
                          {"argmax_power_t", s.argmax_power_t},
                          {"mean_T_star", s.mean_T_star},
                          {"mean_T_tilde", s.mean_T_tilde}};
  }
  os << j.dump(2) << '\n';
}

void write_diagnostics_json(std::ostream& os, const StoppingDiagnostics& diag) {
  json trace = json::array();
  for (const TraceRow& r : diag.trace) {
    trace.push_back({{"t", r.t},
                     {"eta_t", r.eta},
                     {"bias_side", r.bias_side},
                     {"threshold_side", r.threshold_side},
                     {"separation2", r.separation2}});
  }
  json j = {{"rule", rule_name(diag.rule)},
            {"T", diag.T},
            {"eta_T", diag.eta_T},
            {"kappa_emp", diag.kappa_emp},
            {"kappa_pop", diag.kappa_pop ? json(*diag.kappa_pop) : json(nullptr)},
            {"trace", trace}};
  os << j.dump(2) << '\n';
}

Dataset read_dataset_csv(std::istream& is, double noise_sd) {
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("dataset file is empty");
  if (trim(line) != "x,y") throw std::invalid_argument("dataset header must be 'x,y'");
  Dataset d;
  d.noise_sd = noise_sd;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw std::invalid_argument(fmt::format("dataset line {}: expected two columns", lineno));
    }
    try {
      std::size_t used = 0;
      const std::string xs = trim(line.substr(0, comma));
      const std::string ys = trim(line.substr(comma + 1));
      const double x = std::stod(xs, &used);
      if (used != xs.size()) throw std::invalid_argument("x");
      const double y = std::stod(ys, &used);
      if (used != ys.size()) throw std::invalid_argument("y");
      d.x.push_back(x);
      d.y.push_back(y);
    } catch (const std::exception&) {
      throw std::invalid_argument(fmt::format("dataset line {}: not a number pair", lineno));
    }
  }
  d.validate();
  return d;
}

void write_dataset_csv(std::ostream& os, const Dataset& data) {
  os << "x,y\n";
  for (std::size_t i = 0; i < data.n(); ++i) {
    os << format_number(data.x[i]) << ',' << format_number(data.y[i]) << '\n';
  }
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json methods = json::array();
  for (Method m : cfg.methods) methods.push_back(method_name(m));
  json j = {{"signal", {{"id", cfg.signal.name()}, {"c", cfg.signal.c}}},
            {"kernel", kernel_to_json(cfg.kernel)},
            {"n", cfg.n_grid},
            {"replicates", cfg.replicates},
            {"level", cfg.level},
            {"methods", methods},
            {"gamma", cfg.gammas},
            {"seed", cfg.seed},
            {"bootstrap", {{"B", cfg.bootstrap.B}, {"t_max", cfg.bootstrap.t_max}}},
            {"alpha", cfg.alpha ? json(*cfg.alpha) : json("auto")},
            {"noise_sd", cfg.noise_sd},
            {"cv_folds", cfg.cv_folds},
            {"threads", cfg.threads}};
  return j.dump(2);
}

ExperimentConfig config_from_json(const std::string& text) {
  const json j = json::parse(text);
  ExperimentConfig cfg;
  if (j.contains("signal")) {
    cfg.signal.id = parse_signal(j["signal"].at("id").get<std::string>());
    cfg.signal.c = j["signal"].value("c", 0.0);
  }
  if (j.contains("kernel")) cfg.kernel = kernel_from_json(j["kernel"]);
  if (j.contains("n")) cfg.n_grid = j["n"].get<std::vector<std::size_t>>();
  cfg.replicates = j.value("replicates", cfg.replicates);
  cfg.level = j.value("level", cfg.level);
  if (j.contains("methods")) {
    cfg.methods.clear();
    for (const auto& m : j["methods"]) cfg.methods.push_back(parse_method(m.get<std::string>()));
  }
  if (j.contains("gamma")) cfg.gammas = j["gamma"].get<std::vector<double>>();
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("bootstrap")) {
    cfg.bootstrap.B = j["bootstrap"].value("B", cfg.bootstrap.B);
    cfg.bootstrap.t_max = j["bootstrap"].value("t_max", cfg.bootstrap.t_max);
  }
  if (j.contains("alpha")) {
    if (j["alpha"].is_string()) {
      if (j["alpha"].get<std::string>() != "auto") throw std::invalid_argument("alpha must be a number or \"auto\"");
      cfg.alpha.reset();
    } else {
      cfg.alpha = j["alpha"].get<double>();
    }
  }
  cfg.noise_sd = j.value("noise_sd", cfg.noise_sd);
  cfg.cv_folds = j.value("cv_folds", cfg.cv_folds);
  cfg.threads = j.value("threads", cfg.threads);
  cfg.validate();
  return cfg;
}

}  // namespace earlystop
