#pragma once

#include "earlystop/dataset.hpp"
#include "earlystop/harness.hpp"
#include "earlystop/stopping.hpp"

#include <iosfwd>
#include <string>

namespace earlystop {

struct CsvOptions {
  /// When false the wall_ms column is written as 0 so reruns are byte-identical.
  bool include_timing = false;
};

/// Numbers use 17 significant digits; absent optionals are empty fields.
[[nodiscard]] std::string format_number(double v);

/// Header: method,kernel,signal,c,n,gamma,replicates,rejections,rate,mean_T,
/// mean_eta_T,failures,wall_ms,seed
void write_cells_csv(std::ostream& os, const SimulationReport& report, const CsvOptions& opts = {});

/// Header: t,eta_t,mse,power,mu_nt,sigma_nt
void write_curves_csv(std::ostream& os, const SimulationReport& report);

/// Header: rule,t,eta_t,bias_side,threshold_side,separation2
void write_trace_csv(std::ostream& os, const StoppingDiagnostics& diag);

void write_report_json(std::ostream& os, const SimulationReport& report, const CsvOptions& opts = {});
void write_diagnostics_json(std::ostream& os, const StoppingDiagnostics& diag);

/// Dataset file with header `x,y`.
[[nodiscard]] Dataset read_dataset_csv(std::istream& is, double noise_sd = 1.0);
void write_dataset_csv(std::ostream& os, const Dataset& data);

/// JSON mirror of ExperimentConfig.
[[nodiscard]] std::string config_to_json(const ExperimentConfig& cfg);
[[nodiscard]] ExperimentConfig config_from_json(const std::string& text);

}  // namespace earlystop
