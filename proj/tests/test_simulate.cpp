#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"
#include "tvpbart/simulate.hpp"

#include <cmath>

using namespace tvpbart;

TEST_CASE("simulation is a pure function of the seed") {
  DgpSpec spec;
  spec.coef_law = CoefLaw::Tree;
  spec.vol_law = VolLaw::Regime;
  const SimulatedData a = simulate_dgp(spec, 7);
  const SimulatedData b = simulate_dgp(spec, 7);
  const SimulatedData c = simulate_dgp(spec, 8);
  CHECK(a.data.Y == b.data.Y);
  CHECK(a.data.Z == b.data.Z);
  CHECK(a.data.Y != c.data.Y);
  CHECK(a.data.Y.rows() == spec.n_obs + spec.lags);
  CHECK(a.truth.coefficients.size() == static_cast<std::size_t>(spec.n_obs));
  CHECK(a.data.dates.front() == "1960-01-01");
  CHECK(a.data.dates[5] == "1961-04-01");
}

TEST_CASE("step law switches coefficients and variances with the regime") {
  DgpSpec spec;
  spec.n_vars = 2;
  spec.coef_law = CoefLaw::Step;
  spec.vol_law = VolLaw::Regime;
  spec.amplitude = 0.3;
  const SimulatedData s = simulate_dgp(spec, 3);
  int on = 0;
  for (int t = 0; t < spec.n_obs; ++t) {
    const bool regime = s.truth.regime[t];
    CHECK(s.data.Z(t + spec.lags, 1) == (regime ? 1.0 : 0.0));
    const double own = s.truth.coefficients[t](0, 1);
    CHECK(own == doctest::Approx(regime ? 0.8 : 0.5));
    CHECK(s.truth.R(t, 0) == (regime ? 9.0 : 1.0));
    on += regime;
  }
  CHECK(on > 0);
  CHECK(on < spec.n_obs);
  // Errors are reproduced from the truth: y_t - C_t x_t = Gamma q_t + idiosyncratic.
  const Eigen::Index i = 10 + spec.lags;
  VectorXd x(3);
  x << 1.0, s.data.Y(i - 1, 0), s.data.Y(i - 1, 1);
  const VectorXd e = s.data.Y.row(i).transpose() - s.truth.coefficients[10] * x - s.truth.Gamma * s.truth.q.row(10).transpose();
  CHECK(e.cwiseAbs().maxCoeff() < 5.0 * 0.3);
}

TEST_CASE("stationary covariance matches the Lyapunov solution") {
  // Constant VAR(1) without intercept: V = A V A' + Omega with
  // Omega = r Gamma Gamma' + sigma^2 I, and the lag-one autocovariance is A V.
  DgpSpec spec;
  spec.n_vars = 2;
  spec.intercept = false;
  spec.n_obs = 40000;
  spec.A.resize(2, 2);
  spec.A << 0.5, 0.2, -0.1, 0.3;
  spec.Gamma.resize(2, 1);
  spec.Gamma << 0.6, -0.4;
  const SimulatedData s = simulate_dgp(spec, 11);
  const MatrixXd& A = spec.A;
  const MatrixXd omega = spec.Gamma * spec.Gamma.transpose() + 0.09 * MatrixXd::Identity(2, 2);
  MatrixXd kron(4, 4);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) kron.block(2 * i, 2 * j, 2, 2) = A(i, j) * A;
  const VectorXd vec = (MatrixXd::Identity(4, 4) - kron).lu().solve(Eigen::Map<const VectorXd>(omega.data(), 4));
  const MatrixXd V = Eigen::Map<const MatrixXd>(vec.data(), 2, 2);

  const MatrixXd Y = s.data.Y.bottomRows(spec.n_obs - 100);  // drop the start-up
  const MatrixXd C = testing::sample_cov(Y);
  const Eigen::Index n = Y.rows();
  const MatrixXd Yc = Y.rowwise() - Y.colwise().mean();
  const MatrixXd L1 = Yc.bottomRows(n - 1).transpose() * Yc.topRows(n - 1) / static_cast<double>(n - 1);
  const MatrixXd AV = A * V;
  // Relative sampling error of second moments here is about 1.5%.
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      const double scale = std::sqrt(V(a, a) * V(b, b));
      CHECK(std::abs(C(a, b) - V(a, b)) < 0.06 * scale);
      CHECK(std::abs(L1(a, b) - AV(a, b)) < 0.06 * scale);
    }
}

TEST_CASE("explosive coefficient paths are refused unless allowed") {
  DgpSpec spec;
  spec.coef_law = CoefLaw::Step;
  spec.amplitude = 0.6;  // 0.5 + 0.6 > 1 in the regime
  CHECK_THROWS_AS(simulate_dgp(spec, 1), ParameterError);
  spec.allow_explosive = true;
  spec.n_obs = 30;
  CHECK_NOTHROW(simulate_dgp(spec, 1));
  DgpSpec bad;
  bad.Gamma = MatrixXd::Ones(2, 2);
  CHECK_THROWS_AS(simulate_dgp(bad, 1), DimensionError);
}

TEST_CASE("toy regression truth") {
  ToySpec spec;
  spec.n_obs = 100;
  const ToyData sine = simulate_toy(spec, 4);
  CHECK(sine.beta(24) == doctest::Approx(1.0));  // sin(2 pi 25 / 100)
  CHECK(sine.z(0) == 1.0);
  spec.law = CoefLaw::Step;
  const ToyData step = simulate_toy(spec, 4);
  CHECK(step.beta(0) == 1.0);
  CHECK(step.beta(49) == 1.0);
  CHECK(step.beta(50) == -1.0);
  // Residual noise around the truth has the requested scale.
  const VectorXd e = step.y.array() - spec.intercept - step.beta.array() * step.x.array();
  const auto m = testing::moments(std::vector<double>(e.data(), e.data() + e.size()));
  CHECK(std::abs(std::sqrt(m.var) - 0.3) < 0.08);
  CHECK(simulate_toy(spec, 4).y == step.y);
}
