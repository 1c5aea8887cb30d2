#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"
#include "tvpbart/structural.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

using namespace tvpbart;

namespace {

DesignLayout var_layout(int M, int P, bool intercept = true) {
  DesignLayout l;
  l.kind = DesignLayout::Kind::Var;
  l.n_vars = M;
  l.lags = P;
  l.intercept = intercept;
  l.n_regressors = (intercept ? 1 : 0) + M * P;
  return l;
}

// Runs the difference equation y_h = sum_p A_p y_{h-p} forward from a single
// impact, without the companion form.
MatrixXd forward_simulate(const std::vector<MatrixXd>& lag_mats, const VectorXd& impact, int horizons) {
  const Eigen::Index M = impact.size();
  const int P = static_cast<int>(lag_mats.size());
  MatrixXd y = MatrixXd::Zero(horizons, M);
  for (int h = 0; h < horizons; ++h) {
    VectorXd v = h == 0 ? impact : VectorXd::Zero(M);
    for (int p = 1; p <= P && p <= h; ++p) v += lag_mats[p - 1] * y.row(h - p).transpose();
    y.row(h) = v.transpose();
  }
  return y;
}

DrawRecord two_factor_draw(int T) {
  DrawRecord d;
  d.Gamma.resize(3, 2);
  d.Gamma << 0.2, 0.9, 0.1, -0.7, 0.5, 0.1;
  d.R = MatrixXd::Ones(T, 2);
  d.Sigma = MatrixXd::Constant(T, 3, 0.25);
  d.A = MatrixXd::Zero(3, 4);
  d.q = MatrixXd::Zero(T, 2);
  return d;
}

}  // namespace

TEST_CASE("impulse responses match forward simulation of the VAR") {
  Rng rng(1);
  const int M = 2, P = 2, H = 16;
  const DesignLayout layout = var_layout(M, P);
  MatrixXd coef(M, layout.n_regressors);
  for (Eigen::Index i = 0; i < coef.size(); ++i) coef.data()[i] = rng.normal(0.0, 0.3);
  std::vector<MatrixXd> lags;
  for (int p = 1; p <= P; ++p) lags.push_back(coef.block(0, layout.lag_column(p, 0), M, M));
  VectorXd impact(M);
  impact << 0.8, -0.3;
  const MatrixXd got = impulse_response(coef, layout, impact, H);
  const MatrixXd want = forward_simulate(lags, impact, H);
  CHECK((got - want).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(got.row(0).transpose() == impact);
}

TEST_CASE("companion matrix spectral radius equals the largest root") {
  // y_t = 1.1 y_{t-1} - 0.3 y_{t-2}: roots of x^2 - 1.1 x + 0.3 are 0.6 and 0.5.
  const DesignLayout layout = var_layout(1, 2, false);
  MatrixXd coef(1, 2);
  coef << 1.1, -0.3;
  const MatrixXd C = companion_matrix(coef, layout);
  CHECK(C.rows() == 2);
  CHECK(C(1, 0) == 1.0);
  CHECK(spectral_radius(C) == doctest::Approx(0.6).epsilon(1e-12));
  coef << 0.0, -1.21;  // complex pair of modulus 1.1
  CHECK(spectral_radius(companion_matrix(coef, layout)) == doctest::Approx(1.1).epsilon(1e-12));
  DesignLayout reg;
  reg.kind = DesignLayout::Kind::Regression;
  CHECK_THROWS_AS(companion_matrix(coef, reg), DimensionError);
}

TEST_CASE("variance shares add up to one with the idiosyncratic part") {
  Rng rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    MatrixXd G(4, 3);
    for (Eigen::Index i = 0; i < G.size(); ++i) G.data()[i] = rng.normal();
    VectorXd r(3), s(4);
    for (int i = 0; i < 3; ++i) r(i) = std::exp(rng.normal());
    for (int i = 0; i < 4; ++i) s(i) = std::exp(rng.normal());
    const MatrixXd shares = variance_shares(G, r, s);
    const VectorXd total = shares.rowwise().sum() + idiosyncratic_share(G, r, s);
    CHECK((total.array() - 1.0).abs().maxCoeff() < 1e-12);
    CHECK(variance_share(G, r, s, 1) == shares.col(1));
    const double total2 = (G.row(2).array().square() * r.transpose().array()).sum() + s(2);
    CHECK(shares(2, 1) == doctest::Approx(r(1) * G(2, 1) * G(2, 1) / total2).epsilon(1e-12));
  }
  CHECK_THROWS_AS(variance_shares(MatrixXd::Zero(2, 2), VectorXd::Ones(3), VectorXd::Ones(2)), DimensionError);
}

TEST_CASE("business-cycle shock is the dominant factor, signed and scaled on output") {
  const int T = 10;
  DrawRecord d = two_factor_draw(T);
  std::vector<bool> flags(T, false);
  flags[3] = flags[4] = true;
  // Factor 1 dominates output (0) and unemployment (1).
  const ShockId id = identify_bc_shock(d, flags, 0, 1, 2.5);
  CHECK(id.factor == 1);
  CHECK(id.sign == -1);
  CHECK_FALSE(id.sign_conflict);
  const VectorXd impact = id.sign * id.scale * d.Gamma.col(id.factor);
  CHECK(impact(0) == doctest::Approx(-2.5).epsilon(1e-14));
  CHECK(impact(1) > 0.0);

  // Make factor 0 dominant only in flagged periods through its variance.
  for (int t : {3, 4}) d.R(t, 0) = 100.0;
  const ShockId id0 = identify_bc_shock(d, flags, 0, 1, 1.0);
  CHECK(id0.factor == 0);
  CHECK(id0.sign == -1);
  CHECK(id0.sign_conflict);  // both loadings positive

  d.Gamma(0, 0) = 0.0;
  d.Gamma(1, 0) = 5.0;
  const ShockId z = identify_bc_shock(d, flags, 0, 1, 1.0);
  CHECK(z.factor == 0);
  CHECK(z.zero_loading);
  CHECK(z.scale == 1.0);

  CHECK_THROWS(identify_bc_shock(d, std::vector<bool>(T, false), 0, 1, 1.0));
  CHECK_THROWS_AS(identify_bc_shock(d, std::vector<bool>(3, true), 0, 1, 1.0), DimensionError);
}

TEST_CASE("type-7 quantiles interpolate between order statistics") {
  Rng rng(3);
  std::vector<double> v(37);
  for (auto& x : v) x = rng.normal();
  std::vector<double> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (double p : {0.0, 0.16, 0.5, 0.84, 1.0}) {
    const double h = 36.0 * p;
    const int lo = static_cast<int>(std::floor(h));
    const double want = lo >= 36 ? sorted[36] : sorted[lo] + (h - lo) * (sorted[lo + 1] - sorted[lo]);
    CHECK(quantile(v, p) == doctest::Approx(want).epsilon(1e-14));
  }
  CHECK(quantile({1.0, 2.0, 3.0, 4.0}, 0.5) == 2.5);
  CHECK(quantile({5.0}, 0.3) == 5.0);
  CHECK_THROWS_AS(quantile({}, 0.5), DimensionError);
}

TEST_CASE("time-averaged IRF summary") {
  IrfResult r;
  r.resize(5, 3, 2, 1);
  // Identical values over time: the average is the value itself.
  for (int d = 0; d < 5; ++d)
    for (int ti = 0; ti < 3; ++ti) {
      r.at(d, ti, 0, 0) = d;
      r.at(d, ti, 1, 0) = -d + (ti - 1.0);  // symmetric around -d
    }
  const IrfSummary s = average_irf(r);
  CHECK(s.median(0, 0) == 2.0);
  CHECK(s.lower(0, 0) == doctest::Approx(0.64));
  CHECK(s.upper(0, 0) == doctest::Approx(3.36));
  CHECK(s.median(1, 0) == doctest::Approx(-2.0));
  // A symmetric set of draws gives bands symmetric around the median.
  CHECK(s.upper(1, 0) - s.median(1, 0) == doctest::Approx(s.median(1, 0) - s.lower(1, 0)));
}

TEST_CASE("Phillips multiplier skips horizons with no unemployment response") {
  VectorXd p(3), u(3);
  p << 0.5, 0.2, 0.1;
  u << 1.0, 1e-15, -0.5;
  const auto k = phillips_multiplier(p, u);
  CHECK(k[0].value() == 0.5);
  CHECK_FALSE(k[1].has_value());
  CHECK(k[2].value() == -0.2);
  CHECK(phillips_multiplier(p, u, 1e-20)[1].has_value());
  CHECK_THROWS_AS(phillips_multiplier(p, VectorXd::Ones(2)), DimensionError);
}

TEST_CASE("WAIC matches a hand computation") {
  MatrixXd ll(3, 2);
  ll << -1.0, -2.0, -1.5, -2.5, -0.5, -1.0;
  double lpd = 0.0, p = 0.0;
  for (int t = 0; t < 2; ++t) {
    double s = 0.0;
    for (int d = 0; d < 3; ++d) s += std::exp(ll(d, t));
    lpd += std::log(s / 3.0);
    const double m = ll.col(t).mean();
    double v = 0.0;
    for (int d = 0; d < 3; ++d) v += (ll(d, t) - m) * (ll(d, t) - m);
    p += v / 2.0;
  }
  const WaicResult w = waic(ll);
  CHECK(w.lpd == doctest::Approx(lpd).epsilon(1e-14));
  CHECK(w.p_waic == doctest::Approx(p).epsilon(1e-14));
  CHECK(w.waic == doctest::Approx(-2.0 * (lpd - p)).epsilon(1e-14));
  // Large magnitudes do not underflow.
  CHECK(std::isfinite(waic((ll.array() - 5000.0).matrix()).lpd));
  CHECK_THROWS_AS(waic(MatrixXd::Zero(1, 4)), DimensionError);
}

TEST_CASE("counterfactual coefficients combine loadings with tree fits") {
  DrawRecord d;
  d.A = MatrixXd::Constant(1, 2, 0.1);
  MatrixXd lam(2, 2);
  lam << 1.0, 0.0, 0.5, 2.0;
  d.loadings.push_back(lam);
  Ensemble e0 = Ensemble::make(1, TreePrior{0.95, 2.0, 1, 1}, 2.0);
  e0.trees[0] = Tree(0.0);
  e0.trees[0].split(0, 0, 0.5, -1.0, 1.0);
  Ensemble e1 = Ensemble::make(1, TreePrior{0.95, 2.0, 2, 1}, 2.0);
  e1.trees[0] = Tree(0.25);
  d.tvp_trees.push_back({e0, e1});
  VectorXd z(1);
  z << 0.2;  // F = (-1, 0.25)
  const VectorXd tvp = scenario_tvp(d, z, 0);
  CHECK(tvp(0) == doctest::Approx(-1.0));
  CHECK(tvp(1) == doctest::Approx(-0.5 + 0.5));
  z << 0.9;  // F = (1, 0.25)
  const MatrixXd c = scenario_coefficients(d, z);
  CHECK(c(0, 0) == doctest::Approx(1.1));
  CHECK(c(0, 1) == doctest::Approx(0.1 + 0.5 + 0.5));
}
