#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "earlystop/harness.hpp"
#include "earlystop/stopping.hpp"
#include "test_support.hpp"

using namespace earlystop;
using testsupport::uniform_design;

namespace {

EmpiricalKernelEigen unit_eigs() { return EmpiricalKernelEigen::from_matrix(Eigen::MatrixXd::Constant(1, 1, 1.0)); }

// The trace must fail the strict inequality at every t < T and hold at T.
void expect_first_crossing(const StoppingDiagnostics& d, const StepSchedule& schedule) {
  ASSERT_GE(d.T, 1);
  ASSERT_EQ(d.trace.size(), static_cast<std::size_t>(d.T));
  for (std::size_t i = 0; i < d.trace.size(); ++i) {
    const TraceRow& r = d.trace[i];
    EXPECT_EQ(r.t, static_cast<int>(i) + 1);
    EXPECT_DOUBLE_EQ(r.eta, schedule.eta(r.t));
    if (r.t < d.T) {
      EXPECT_FALSE(r.bias_side < r.threshold_side) << "t=" << r.t;
    } else {
      EXPECT_TRUE(r.bias_side < r.threshold_side);
    }
  }
  EXPECT_DOUBLE_EQ(d.eta_T, schedule.eta(d.T));
}

Dataset mcos_data(std::size_t n, double c, std::uint64_t seed) {
  return generate_dataset(SignalModel{SignalId::MCos, c}, n, 1.0, seed);
}

}  // namespace

TEST(StopRuleTesting, ScalarToy) {
  const std::vector<double> mu{1.0};
  const auto schedule = StepSchedule::constant(1.0, 1.0);
  const auto d = stop_rule_testing(mu, schedule, 1.0, 10);
  EXPECT_EQ(d.T, 2);
  ASSERT_EQ(d.trace.size(), 2u);
  EXPECT_DOUBLE_EQ(d.trace[0].bias_side, 1.0);
  EXPECT_DOUBLE_EQ(d.trace[0].threshold_side, 1.0);
  EXPECT_DOUBLE_EQ(d.trace[1].bias_side, 0.5);
  expect_first_crossing(d, schedule);
}

TEST(StopRuleEstimation, ScalarToy) {
  const std::vector<double> mu{1.0};
  const auto schedule = StepSchedule::constant(1.0, 1.0);
  const auto d = stop_rule_estimation(mu, schedule, 1.0, 10);
  EXPECT_EQ(d.T, 2);
  expect_first_crossing(d, schedule);
}

TEST(StopRuleTesting, ThresholdsMonotoneAndSeparationTrace) {
  const auto eigs = build_empirical_kernel(KernelSpec::sobolev(2), uniform_design(150, 7));
  const auto schedule = make_schedule(eigs);
  const auto d = stop_rule_testing(eigs.eigenvalues(), schedule, 1.0, default_horizon(150, schedule));
  expect_first_crossing(d, schedule);
  for (std::size_t i = 1; i < d.trace.size(); ++i) {
    EXPECT_LT(d.trace[i].bias_side, d.trace[i - 1].bias_side);
    EXPECT_GE(d.trace[i].threshold_side, d.trace[i - 1].threshold_side);
  }
  for (const TraceRow& r : d.trace) {
    const auto m = null_moments(shrinkage_diagonal(eigs.eigenvalues(), schedule, r.t));
    EXPECT_NEAR(r.separation2, 1.0 / r.eta + m.sigma, 1e-12);
  }
  EXPECT_EQ(d.kappa_emp, kappa_index(eigs.eigenvalues(), d.eta_T, KappaTie::Exclusive));
  EXPECT_FALSE(d.kappa_pop.has_value());
}

TEST(StopRuleTesting, ReportsPopulationKappa) {
  const auto eigs = build_empirical_kernel(KernelSpec::sobolev(2), uniform_design(100, 2));
  const auto schedule = make_schedule(eigs);
  const auto d = stop_rule_testing(eigs.eigenvalues(), schedule, 1.0, 100000, DecayModel::polynomial(2));
  ASSERT_TRUE(d.kappa_pop.has_value());
  const auto pop = population_spectrum(DecayModel::polynomial(2), 100);
  EXPECT_EQ(*d.kappa_pop, kappa_index(pop, d.eta_T, KappaTie::Inclusive));
}

TEST(StopRuleTesting, HorizonExhaustedCarriesTrace) {
  const auto eigs = build_empirical_kernel(KernelSpec::sobolev(2), uniform_design(200, 3));
  const auto schedule = make_schedule(eigs);
  try {
    (void)stop_rule_testing(eigs.eigenvalues(), schedule, 1.0, 3);
    FAIL() << "expected HorizonExhausted";
  } catch (const HorizonExhausted& e) {
    EXPECT_EQ(e.diagnostics().trace.size(), 3u);
    EXPECT_EQ(e.diagnostics().rule, StoppingRule::Testing);
    for (const auto& r : e.diagnostics().trace) EXPECT_GE(r.bias_side, r.threshold_side);
  }
}

TEST(StopRuleTesting, RejectsBadInputs) {
  const std::vector<double> mu{1.0};
  const std::vector<double> empty;
  const auto schedule = StepSchedule::constant(1.0);
  EXPECT_THROW((void)stop_rule_testing(mu, schedule, 0.0, 10), std::invalid_argument);
  EXPECT_THROW((void)stop_rule_testing(mu, schedule, 1.0, 0), std::invalid_argument);
  EXPECT_THROW((void)stop_rule_estimation(empty, schedule, 1.0, 10), std::invalid_argument);
}

TEST(StopRuleEstimation, NotLaterThanTesting) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    for (const KernelSpec& k : {KernelSpec::sobolev(2), KernelSpec::gaussian(), KernelSpec::gaussian_bandwidth(0.1)}) {
      const std::size_t n = 64 + 40 * seed;
      const auto mu = empirical_spectrum(k, uniform_design(n, seed));
      const auto schedule = StepSchedule::constant(mu[0]);
      const int h = default_horizon(n, schedule);
      const auto a = stop_rule_testing(mu, schedule, 1.0, h);
      const auto b = stop_rule_estimation(mu, schedule, 1.0, h);
      expect_first_crossing(b, schedule);
      EXPECT_LE(b.T, a.T) << k.name() << " n=" << n;
    }
  }
}

TEST(StopRuleOracle, ZeroTruthStopsAtOne) {
  const auto eigs = build_empirical_kernel(KernelSpec::gaussian_bandwidth(0.1), uniform_design(30, 5));
  const std::vector<double> zero(30, 0.0);
  for (double alpha : {1.0, 0.1, 0.01}) {
    const auto schedule = make_schedule(eigs, alpha);
    const auto d = stop_rule_oracle(eigs, schedule, zero, 10);
    EXPECT_EQ(d.T, 1);
    EXPECT_EQ(d.trace[0].bias_side, 0.0);
  }
}

TEST(StopRuleOracle, ScalarToy) {
  const auto eigs = unit_eigs();
  const auto schedule = StepSchedule::constant(1.0, 1.0);
  const std::vector<double> f{2.0};
  const auto d = stop_rule_oracle(eigs, schedule, f, 5);
  EXPECT_EQ(d.T, 1);
  EXPECT_EQ(d.trace[0].bias_side, 0.0);
  EXPECT_DOUBLE_EQ(d.trace[0].threshold_side, std::sqrt(2.0));
}

TEST(StopRuleOracle, McosTraceIsMonotone) {
  const std::size_t n = 200;
  const KernelSpec k = experiment_kernel(KernelFamily::GaussianEDK);
  const Dataset data = mcos_data(n, 1.0, 12);
  const auto eigs = build_empirical_kernel(k, data.x);
  const auto schedule = make_schedule(eigs);
  const auto truth = data.truth();
  const auto d = stop_rule_oracle(eigs, schedule, truth, default_horizon(n, schedule));
  expect_first_crossing(d, schedule);
  for (std::size_t i = 1; i < d.trace.size(); ++i) {
    EXPECT_LE(d.trace[i].bias_side, d.trace[i - 1].bias_side);
    EXPECT_GE(d.trace[i].threshold_side, d.trace[i - 1].threshold_side);
  }
  EXPECT_THROW((void)stop_rule_oracle(eigs, schedule, std::vector<double>(n - 1, 0.0), 10), std::invalid_argument);
}

TEST(StopRuleBootstrap, Deterministic) {
  const Dataset data = mcos_data(80, 1.0, 3);
  const KernelSpec k = experiment_kernel(KernelFamily::GaussianEDK);
  const auto eigs = build_empirical_kernel(k, data.x);
  const auto schedule = make_schedule(eigs);
  BootstrapConfig cfg{10, 99, 0};
  const auto a = stop_rule_bootstrap(data, k, eigs, schedule, cfg);
  const auto b = stop_rule_bootstrap(data, k, schedule, cfg);
  EXPECT_EQ(a.T, b.T);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    EXPECT_EQ(a.trace[i].bias_side, b.trace[i].bias_side);
    EXPECT_EQ(a.trace[i].threshold_side, b.trace[i].threshold_side);
  }
  expect_first_crossing(a, schedule);
}

TEST(StopRuleBootstrap, ZeroResponsesStopAtOne) {
  Dataset data = mcos_data(40, 0.0, 4);
  std::fill(data.y.begin(), data.y.end(), 0.0);
  const KernelSpec k = KernelSpec::sobolev(2);
  const auto d = stop_rule_bootstrap(data, k, make_schedule(build_empirical_kernel(k, data.x)), BootstrapConfig{5, 1, 0});
  EXPECT_EQ(d.T, 1);
  EXPECT_EQ(d.trace[0].bias_side, 0.0);
}

TEST(StopRuleBootstrap, DegenerateSampleAllowed) {
  Dataset data;
  data.x.assign(6, 0.25);
  data.y = {0.1, -0.3, 0.2, 0.5, -0.1, 0.05};
  const KernelSpec k = KernelSpec::gaussian_bandwidth(0.1);
  const auto eigs = build_empirical_kernel(k, data.x);
  const auto d = stop_rule_bootstrap(data, k, eigs, make_schedule(eigs), BootstrapConfig{4, 2, 0});
  EXPECT_GE(d.T, 1);
}

TEST(StopRuleBootstrap, EfficientPathMatchesReference) {
  for (const KernelSpec& k : {experiment_kernel(KernelFamily::GaussianEDK), KernelSpec::sobolev(2)}) {
    const Dataset data = mcos_data(30, 1.0, 8);
    const auto eigs = build_empirical_kernel(k, data.x);
    const auto schedule = make_schedule(eigs);
    BootstrapConfig cfg{3, 17, 12};
    StoppingDiagnostics d;
    try {
      d = stop_rule_bootstrap(data, k, eigs, schedule, cfg);
    } catch (const HorizonExhausted& e) {
      d = e.diagnostics();
    }
    for (const TraceRow& r : d.trace) {
      const double ref = bootstrap_bias_proxy_reference(data, k, eigs, schedule, cfg, r.t);
      EXPECT_NEAR(r.bias_side, ref, 1e-9 * std::max(1.0, ref)) << k.name() << " t=" << r.t;
    }
  }
}

TEST(StopRuleBootstrap, ValidatesConfig) {
  const Dataset data = mcos_data(10, 0.0, 1);
  const KernelSpec k = KernelSpec::sobolev(2);
  const auto eigs = build_empirical_kernel(k, data.x);
  EXPECT_THROW((void)stop_rule_bootstrap(data, k, eigs, make_schedule(eigs), BootstrapConfig{0, 1, 0}), std::invalid_argument);
  const auto other = build_empirical_kernel(k, uniform_design(11, 1));
  EXPECT_THROW((void)stop_rule_bootstrap(data, k, other, make_schedule(other), BootstrapConfig{}), std::invalid_argument);
}

// Sanity band: bootstrap T within a factor of 4 of the oracle T on the same data.
TEST(StopRuleBootstrap, WithinFactorFourOfOracle) {
  const std::size_t n = 200;
  const KernelSpec k = experiment_kernel(KernelFamily::GaussianEDK);
  int within = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Dataset data = mcos_data(n, 1.0, 500 + seed);
    const auto eigs = build_empirical_kernel(k, data.x);
    const auto schedule = make_schedule(eigs);
    const auto truth = data.truth();
    const int h = default_horizon(n, schedule);
    const int oracle = stop_rule_oracle(eigs, schedule, truth, h).T;
    const int boot = stop_rule_bootstrap(data, k, eigs, schedule, BootstrapConfig{10, seed, h}).T;
    const double ratio = static_cast<double>(boot) / oracle;
    EXPECT_GE(ratio, 0.25) << "seed " << seed << " boot " << boot << " oracle " << oracle;
    EXPECT_LE(ratio, 4.0) << "seed " << seed << " boot " << boot << " oracle " << oracle;
    within += ratio >= 0.25 && ratio <= 4.0;
  }
  EXPECT_EQ(within, 20);
}
