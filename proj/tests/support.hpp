// Small statistics helpers shared by the test binaries.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace testing {

struct Moments {
  double mean = 0.0;
  double var = 0.0;
  double n = 0.0;

  double se_mean() const { return std::sqrt(var / n); }
};

inline Moments moments(const std::vector<double>& x) {
  Moments m;
  m.n = static_cast<double>(x.size());
  for (double v : x) m.mean += v;
  m.mean /= m.n;
  for (double v : x) m.var += (v - m.mean) * (v - m.mean);
  m.var /= (m.n - 1.0);
  return m;
}

/// z-score of a sample mean against a known expectation.
inline double mean_z(const std::vector<double>& x, double expected) {
  const Moments m = moments(x);
  return (m.mean - expected) / m.se_mean();
}

/// z-score of the sample variance against a known variance, using the
/// fourth central moment for its standard error.
inline double var_z(const std::vector<double>& x, double expected) {
  const Moments m = moments(x);
  double m4 = 0.0;
  for (double v : x) m4 += std::pow(v - m.mean, 4);
  m4 /= m.n;
  const double se = std::sqrt((m4 - m.var * m.var) / m.n);
  return (m.var - expected) / se;
}

/// Sample covariance of the rows of a draws x dim matrix.
inline Eigen::MatrixXd sample_cov(const Eigen::MatrixXd& draws) {
  const Eigen::RowVectorXd mu = draws.colwise().mean();
  const Eigen::MatrixXd c = draws.rowwise() - mu;
  return c.transpose() * c / static_cast<double>(draws.rows() - 1);
}

}  // namespace testing
