#include "tvpbart/simulate.hpp"

#include "tvpbart/random.hpp"
#include "tvpbart/structural.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

namespace tvpbart {

namespace {

DesignLayout var_layout(const DgpSpec& s) {
  DesignLayout lay;
  lay.kind = DesignLayout::Kind::Var;
  lay.n_vars = s.n_vars;
  lay.lags = s.lags;
  lay.intercept = s.intercept;
  lay.n_regressors = (s.intercept ? 1 : 0) + s.n_vars * s.lags;
  return lay;
}

MatrixXd own_first_lag(const DesignLayout& lay, double value) {
  MatrixXd out = MatrixXd::Zero(lay.n_vars, lay.n_regressors);
  for (int m = 0; m < lay.n_vars; ++m) out(m, lay.lag_column(1, m)) = value;
  return out;
}

double law_multiplier(CoefLaw law, bool regime, double trend, double t, double T) {
  switch (law) {
    case CoefLaw::Constant: return 0.0;
    case CoefLaw::Step: return regime ? 1.0 : 0.0;
    case CoefLaw::Sine: return std::sin(2.0 * std::numbers::pi * t / T);
    case CoefLaw::Tree:
      if (regime) return 1.0;
      return trend <= 0.5 ? -1.0 : 0.0;
  }
  return 0.0;
}

}  // namespace

std::vector<std::string> quarterly_dates(int n, int first_year) {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(n));
  char buf[16];
  for (int i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof buf, "%04d-%02d-01", first_year + i / 4, 1 + 3 * (i % 4));
    out.emplace_back(buf);
  }
  return out;
}

SimulatedData simulate_dgp(const DgpSpec& spec, std::uint64_t seed) {
  if (spec.n_vars < 1 || spec.lags < 1 || spec.n_obs < 2 || spec.n_factors < 1)
    throw ParameterError("simulation needs n_vars >= 1, lags >= 1, n_obs >= 2 and n_factors >= 1");
  const DesignLayout lay = var_layout(spec);
  const int M = spec.n_vars, P = spec.lags, T = spec.n_obs, Q = spec.n_factors, K = lay.n_regressors;
  const int N = T + P;

  const MatrixXd A = spec.A.size() ? spec.A : own_first_lag(lay, 0.5);
  const MatrixXd pattern = spec.pattern.size() ? spec.pattern : own_first_lag(lay, 1.0);
  const MatrixXd Gamma = spec.Gamma.size() ? spec.Gamma : MatrixXd::Constant(M, Q, 0.5);
  const VectorXd mult = spec.vol_multiplier.size() ? spec.vol_multiplier : VectorXd::Constant(Q, 9.0);
  if (A.rows() != M || A.cols() != K || pattern.rows() != M || pattern.cols() != K)
    throw DimensionError("coefficient matrices must be M x K");
  if (Gamma.rows() != M || Gamma.cols() != Q || mult.size() != Q)
    throw DimensionError("Gamma must be M x Q with one volatility multiplier per factor");
  if (spec.idio_sd <= 0.0 || spec.factor_var_base <= 0.0) throw ParameterError("variances must be positive");

  Rng rng = Rng::substream(seed, Stream::Simulation, 0);

  // Modifiers for every row, presample included.
  MatrixXd Zm(N, 3);
  bool regime = rng.bernoulli(0.5);
  double noise = rng.normal() / std::sqrt(1.0 - spec.noise_ar * spec.noise_ar);
  for (int i = 0; i < N; ++i) {
    if (i > 0) {
      if (!rng.bernoulli(spec.regime_stay)) regime = !regime;
      noise = spec.noise_ar * noise + rng.normal();
    }
    Zm(i, 0) = static_cast<double>(i - P + 1) / T;
    Zm(i, 1) = regime ? 1.0 : 0.0;
    Zm(i, 2) = noise;
  }

  SimulatedData out;
  DgpTruth& tr = out.truth;
  tr.Gamma = Gamma;
  tr.R.resize(T, Q);
  tr.Sigma = MatrixXd::Constant(T, M, spec.idio_sd * spec.idio_sd);
  tr.q.resize(T, Q);
  MatrixXd Y = MatrixXd::Zero(N, M);
  for (int i = 0; i < P; ++i)
    for (int m = 0; m < M; ++m) Y(i, m) = spec.idio_sd * rng.normal();

  for (int t = 0; t < T; ++t) {
    const int i = t + P;
    const bool on = Zm(i, 1) > 0.5;
    tr.regime.push_back(on);
    const MatrixXd C = A + law_multiplier(spec.coef_law, on, Zm(i, 0), t + 1.0, T) * spec.amplitude * pattern;
    if (!spec.allow_explosive && spectral_radius(companion_matrix(C, lay)) >= 1.0)
      throw ParameterError("explosive coefficients at period " + std::to_string(t) + " (set allow_explosive to override)");
    tr.coefficients.push_back(C);

    VectorXd x(K);
    int c = 0;
    if (spec.intercept) x(c++) = 1.0;
    for (int p = 1; p <= P; ++p)
      for (int m = 0; m < M; ++m) x(c++) = Y(i - p, m);

    for (int j = 0; j < Q; ++j) {
      bool active = false;
      if (spec.vol_law == VolLaw::Step) active = t >= T / 2;
      if (spec.vol_law == VolLaw::Regime) active = on;
      tr.R(t, j) = spec.factor_var_base * (active ? mult(j) : 1.0);
      tr.q(t, j) = std::sqrt(tr.R(t, j)) * rng.normal();
    }
    const VectorXd e = Gamma * tr.q.row(t).transpose() + spec.idio_sd * rng.normal_vector(M);
    Y.row(i) = (C * x + e).transpose();
  }
  if (!Y.allFinite()) throw NumericalError("simulated series overflowed");

  Dataset& d = out.data;
  d.Y = Y;
  d.Z = Zm;
  for (int m = 0; m < M; ++m) d.variable_names.push_back("y" + std::to_string(m + 1));
  d.modifier_names = {"trend", "regime", "noise"};
  d.dates = quarterly_dates(N);
  return out;
}

ToyData simulate_toy(const ToySpec& spec, std::uint64_t seed) {
  if (spec.n_obs < 2) throw ParameterError("toy simulation needs at least two observations");
  Rng rng = Rng::substream(seed, Stream::Simulation, 1);
  const int T = spec.n_obs;
  ToyData d;
  d.y.resize(T);
  d.x.resize(T);
  d.z.resize(T);
  d.beta.resize(T);
  for (int t = 0; t < T; ++t) {
    double f = 0.0;
    switch (spec.law) {
      case CoefLaw::Constant: f = 0.0; break;
      case CoefLaw::Step: f = t < T / 2 ? 1.0 : -1.0; break;
      case CoefLaw::Sine: f = std::sin(2.0 * std::numbers::pi * (t + 1.0) / T); break;
      case CoefLaw::Tree: f = t < T / 3 ? 1.0 : (t < 2 * T / 3 ? -1.0 : 0.0); break;
    }
    d.beta(t) = spec.base + spec.amplitude * f;
    d.x(t) = rng.normal();
    d.z(t) = t + 1.0;
    d.y(t) = spec.intercept + d.beta(t) * d.x(t) + spec.noise_sd * rng.normal();
  }
  d.dates = quarterly_dates(T);
  return d;
}

}  // namespace tvpbart
