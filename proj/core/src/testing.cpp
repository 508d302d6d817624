#include "earlystop/testing.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <stdexcept>

namespace earlystop {

double test_statistic(std::span<const double> f) {
  if (f.empty()) throw std::invalid_argument("test_statistic needs n >= 1");
  double acc = 0.0;
  for (double v : f) acc += v * v;
  return acc / static_cast<double>(f.size());
}

double test_statistic(const Eigen::VectorXd& f) {
  return test_statistic(std::span<const double>(f.data(), static_cast<std::size_t>(f.size())));
}

NullMoments filter_null_moments(const Eigen::VectorXd& filter, double noise_variance) {
  if (!(noise_variance > 0.0)) throw std::invalid_argument("noise variance must be > 0");
  if (filter.size() == 0) throw std::invalid_argument("empty spectral filter");
  const double n = static_cast<double>(filter.size());
  const Eigen::ArrayXd h2 = filter.array().square();
  NullMoments out;
  out.mu = noise_variance * h2.sum() / n;
  out.sigma = noise_variance * std::sqrt(2.0 * h2.square().sum()) / n;
  return out;
}

NullMoments null_moments(const ShrinkageDiagonal& shrink, double noise_variance) {
  return filter_null_moments((1.0 - shrink.s.array()).matrix(), noise_variance);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile needs p in (0, 1)");
  // Evaluate on the lower half and mirror so that q(p) == -q(1 - p) exactly.
  static const boost::math::normal_distribution<double> standard;
  if (p > 0.5) return -boost::math::quantile(standard, 1.0 - p);
  if (p == 0.5) return 0.0;
  return boost::math::quantile(standard, p);
}

TestReport wald_decision(double statistic, const NullMoments& moments, double level) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("level must be in (0, 1)");
  TestReport r;
  r.statistic = statistic;
  r.moments = moments;
  r.level = level;
  r.quantile = normal_quantile(1.0 - level / 2.0);
  if (!(moments.sigma > 0.0)) {
    r.decision = Decision::Degenerate;
    return r;
  }
  r.z = (statistic - moments.mu) / moments.sigma;
  r.decision = std::abs(statistic - moments.mu) >= r.quantile * moments.sigma ? Decision::Reject
                                                                              : Decision::Accept;
  return r;
}

}  // namespace earlystop
