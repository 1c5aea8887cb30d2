#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tvpbart/core.hpp"

using namespace tvpbart;

TEST_CASE("defaults are valid and retained draws follow burn-in and thinning") {
  ModelConfig c;
  CHECK_NOTHROW(validate_config(c));
  CHECK(c.retained_draws() == 10000);
  c.thin = 3;
  CHECK(c.retained_draws() == 3333);
}

TEST_CASE("config validation names the offending field") {
  auto field_of = [](ModelConfig c) {
    try {
      validate_config(c);
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string();
  };
  ModelConfig c;
  c.alpha = 1.0;
  CHECK(field_of(c) == "alpha");
  c = {};
  c.zeta = 1.0;
  CHECK(field_of(c) == "zeta");
  c = {};
  c.n_burn = c.n_draws;
  CHECK(field_of(c) == "n_burn");
  c = {};
  c.n_vol_factors = 0;
  CHECK(field_of(c) == "Q_q");
  c = {};
  c.process_var_scale = 0.0;
  CHECK(field_of(c) == "B_v");
  c = {};
  c.min_leaf_size = 0;
  CHECK(field_of(c) == "n_min");
}

TEST_CASE("scaler maps the sample range onto [-0.5, 0.5] and back") {
  VectorXd x(4);
  x << 1.0, 3.0, 5.0, 2.0;
  const Scaler s = fit_scaler(x);
  CHECK(s.center == doctest::Approx(3.0));
  CHECK(s.half_range == doctest::Approx(2.0));
  const VectorXd u = s.forward(x);
  CHECK(u.minCoeff() == doctest::Approx(-0.5));
  CHECK(u.maxCoeff() == doctest::Approx(0.5));
  CHECK((s.inverse(u) - x).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(s.unit() == doctest::Approx(4.0));
}

TEST_CASE("constant series cannot be scaled") {
  CHECK_THROWS_AS(fit_scaler(VectorXd::Constant(5, 2.0)), DegenerateScaleError);
  CHECK_THROWS_AS(fit_scalers(MatrixXd::Zero(5, 1), true, false), DegenerateScaleError);
  const auto id = fit_scalers(MatrixXd::Zero(5, 2), false);
  CHECK(id.size() == 2);
  CHECK(id[0].unit() == 1.0);
}

TEST_CASE("lag design rows hold the intercept and stacked lags") {
  Dataset d;
  d.Y.resize(6, 2);
  for (int t = 0; t < 6; ++t) d.Y.row(t) << 10.0 * t, 10.0 * t + 1.0;
  d.Z = VectorXd::LinSpaced(6, 0.0, 5.0);
  d.dates = {"a", "b", "c", "d", "e", "f"};
  const DesignData x = build_design(d, 2, true);
  REQUIRE(x.n_obs() == 4);
  REQUIRE(x.n_regressors() == 5);
  // Row 0 corresponds to t = 2: (1, y_1', y_0').
  Eigen::RowVectorXd expect(5);
  expect << 1.0, 10.0, 11.0, 0.0, 1.0;
  CHECK((x.X.row(0) - expect).norm() == 0.0);
  CHECK(x.Y(0, 0) == 20.0);
  CHECK(x.Z(0, 0) == 2.0);
  CHECK(x.dates.front() == "c");
  CHECK(x.layout.lag_column(2, 1) == 4);
  CHECK_THROWS_AS(build_design(d, 5, true), DimensionError);
  CHECK_THROWS_AS(build_design(d, 0, true), DimensionError);
}

TEST_CASE("OLS on scaled data maps back to OLS on raw data") {
  // The scaling is an invertible affine map of every series, so least squares
  // commutes with it; this checks unscale_coefficients against a raw fit.
  Dataset d;
  const int T = 60;
  d.Y.resize(T, 2);
  d.Z = VectorXd::LinSpaced(T, 0.0, 1.0);
  double a = 0.3, b = -1.0;
  for (int t = 0; t < T; ++t) {
    a = 2.0 + 0.6 * a + 0.3 * std::sin(1.7 * t);
    b = -5.0 + 0.2 * a + 0.5 * b + 0.4 * std::cos(0.9 * t * t);
    d.Y.row(t) << 3.0 * a, b;
  }
  const DesignData raw = build_design(d, 2, true);
  const auto scalers = fit_scalers(raw.Y, true, true);
  const DesignData scaled = scale_design(raw, scalers);
  auto ols = [](const DesignData& x) {
    return MatrixXd((x.X.transpose() * x.X).ldlt().solve(x.X.transpose() * x.Y).transpose());
  };
  const MatrixXd back = unscale_coefficients(ols(scaled), scaled.layout, scalers);
  CHECK((back - ols(raw)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("regression designs prepend an intercept and keep regressors unscaled") {
  MatrixXd y = VectorXd::LinSpaced(5, 0.0, 4.0);
  MatrixXd x = VectorXd::LinSpaced(5, 1.0, 2.0);
  MatrixXd z = VectorXd::LinSpaced(5, 1.0, 5.0);
  const DesignData d = make_regression_design(y, x, z, true);
  CHECK(d.layout.kind == DesignLayout::Kind::Regression);
  CHECK(d.X.col(0).isOnes());
  const auto sc = fit_scalers(d.Y, true, true);
  const DesignData s = scale_design(d, sc);
  CHECK((s.X - d.X).norm() == 0.0);
  MatrixXd coef(1, 2);
  coef << 0.1, 0.25;
  const MatrixXd raw = unscale_coefficients(coef, d.layout, sc);
  CHECK(raw(0, 1) == doctest::Approx(0.25 * sc[0].unit()));
  CHECK(raw(0, 0) == doctest::Approx(sc[0].center + 0.1 * sc[0].unit()));
}
