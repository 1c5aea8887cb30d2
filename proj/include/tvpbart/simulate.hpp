// Forward simulation of the full model for recovery tests and the CLI
// `simulate` subcommand, plus the single-equation toy regression.
#pragma once

#include "tvpbart/core.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tvpbart {

/// How the coefficients move: c_t = A + f_t * amplitude * pattern.
///   Constant: f_t = 0
///   Step:     f_t = regime_t
///   Sine:     f_t = sin(2 pi t / T)
///   Tree:     f_t = +1 if regime_t, else -1 if trend_t <= 0.5, else 0
enum class CoefLaw { Constant, Step, Sine, Tree };

/// How factor variances move: r_jt = factor_var_base * (multiplier_j when
/// active, else 1). Step is active in the second half of the sample, Regime
/// whenever the Markov regime is on.
enum class VolLaw { Constant, Step, Regime };

struct DgpSpec {
  int n_vars = 3;
  int lags = 1;
  int n_obs = 200;  // usable rows; the dataset carries `lags` extra presample rows
  int n_factors = 1;
  bool intercept = true;

  MatrixXd A;  // M x K; empty: 0.5 on each own first lag
  CoefLaw coef_law = CoefLaw::Constant;
  double amplitude = 0.3;
  MatrixXd pattern;  // M x K; empty: ones on each own first lag

  VolLaw vol_law = VolLaw::Constant;
  double factor_var_base = 1.0;
  VectorXd vol_multiplier;  // per factor; empty: 9 for every factor
  MatrixXd Gamma;           // M x Q; empty: 0.5 everywhere
  double idio_sd = 0.3;

  double regime_stay = 0.95;  // persistence of the binary Markov regime
  double noise_ar = 0.8;      // AR(1) coefficient of the noise modifier
  bool allow_explosive = false;
};

struct DgpTruth {
  std::vector<MatrixXd> coefficients;  // per usable row, M x K
  MatrixXd R;                          // T x Q factor variances
  MatrixXd Sigma;                      // T x M idiosyncratic variances
  MatrixXd q;                          // T x Q factors
  MatrixXd Gamma;                      // M x Q
  std::vector<bool> regime;            // per usable row
};

struct SimulatedData {
  Dataset data;  // T + P rows; modifiers "trend", "regime", "noise"
  DgpTruth truth;
};

/// Throws ParameterError if some period's companion matrix has spectral
/// radius >= 1 and allow_explosive is false.
SimulatedData simulate_dgp(const DgpSpec& spec, std::uint64_t seed);

/// n quarterly ISO dates starting in January of `first_year`.
std::vector<std::string> quarterly_dates(int n, int first_year = 1960);

/// y_t = intercept + beta_t x_t + e_t with x_t ~ N(0, 1) and z_t = t.
struct ToySpec {
  int n_obs = 200;
  CoefLaw law = CoefLaw::Sine;  // Step: +amplitude in the first half, -amplitude after
  double intercept = 0.5;
  double base = 0.0;
  double amplitude = 1.0;
  double noise_sd = 0.3;
};

struct ToyData {
  VectorXd y;
  VectorXd x;
  VectorXd z;
  VectorXd beta;  // true path
  std::vector<std::string> dates;
};

ToyData simulate_toy(const ToySpec& spec, std::uint64_t seed);

}  // namespace tvpbart
