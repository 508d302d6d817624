#include "earlystop/dataset.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace earlystop {

double SignalModel::operator()(double x) const {
  constexpr double kFourPi = 4.0 * std::numbers::pi;
  switch (id) {
    case SignalId::MCos:
      return c * std::cos(kFourPi * x);
    case SignalId::MMix:
      return c * (0.8 * (x - 0.5) * (x - 0.5) + 0.2 * std::sin(kFourPi * x));
    case SignalId::MSmooth:
      return 0.5 * x * x + 0.5 * std::sin(kFourPi * x);
    case SignalId::MKink:
      return 0.5 * x * x + 0.5 * std::abs(x - 0.5);
  }
  throw std::logic_error("unknown signal");
}

std::string SignalModel::name() const {
  switch (id) {
    case SignalId::MCos: return "mcos";
    case SignalId::MMix: return "mmix";
    case SignalId::MSmooth: return "msmooth";
    case SignalId::MKink: return "mkink";
  }
  return "unknown";
}

SignalId parse_signal(const std::string& name) {
  if (name == "mcos") return SignalId::MCos;
  if (name == "mmix") return SignalId::MMix;
  if (name == "msmooth") return SignalId::MSmooth;
  if (name == "mkink") return SignalId::MKink;
  throw std::invalid_argument("unknown signal '" + name + "'");
}

std::vector<double> Dataset::truth() const {
  if (!signal) throw std::logic_error("dataset has no generating signal");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (*signal)(x[i]);
  return out;
}

void Dataset::validate() const {
  if (x.empty()) throw std::invalid_argument("dataset is empty");
  if (x.size() != y.size()) throw std::invalid_argument("dataset x and y lengths differ");
  for (double v : x) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("design points must lie in [0, 1]");
  }
  for (double v : y) {
    if (!std::isfinite(v)) throw std::invalid_argument("responses must be finite");
  }
  if (!(noise_sd > 0.0)) throw std::invalid_argument("noise_sd must be > 0");
  if (signal && !(signal->c >= 0.0)) throw std::invalid_argument("signal strength c must be >= 0");
}

}  // namespace earlystop
