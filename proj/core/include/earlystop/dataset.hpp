#pragma once

#include <optional>
#include <string>
#include <vector>

namespace earlystop {

enum class SignalId { MCos, MMix, MSmooth, MKink };

/// Regression function used to simulate responses. MSmooth and MKink carry
/// fixed coefficients and ignore `c`.
struct SignalModel {
  SignalId id = SignalId::MCos;
  double c = 0.0;

  [[nodiscard]] double operator()(double x) const;
  [[nodiscard]] std::string name() const;
  friend bool operator==(const SignalModel&, const SignalModel&) = default;
};

[[nodiscard]] SignalId parse_signal(const std::string& name);

/// Sample (x_i, y_i), i = 1..n, with y = f(x) + noise.
struct Dataset {
  std::vector<double> x;
  std::vector<double> y;
  double noise_sd = 1.0;
  std::optional<SignalModel> signal;

  [[nodiscard]] std::size_t n() const { return x.size(); }
  /// Truth at the design points; requires `signal`.
  [[nodiscard]] std::vector<double> truth() const;
  /// Throws std::invalid_argument on mismatched lengths, empty data, or x outside [0, 1].
  void validate() const;
};

}  // namespace earlystop
