// Post-estimation analysis on retained draws: variance shares, labeling of
// the business-cycle shock, impulse responses through the companion form,
// Phillips-curve multipliers, counterfactual TVPs and WAIC.
#pragma once

#include "tvpbart/core.hpp"
#include "tvpbart/sampler.hpp"

#include <optional>
#include <vector>

namespace tvpbart {

/// M x Q matrix; column j holds r_j gamma_j^2 / diag(Gamma R Gamma' + Sigma).
MatrixXd variance_shares(const MatrixXd& Gamma, const VectorXd& factor_var, const VectorXd& idio_var);
VectorXd variance_share(const MatrixXd& Gamma, const VectorXd& factor_var, const VectorXd& idio_var, int factor);
/// Share of each variable's variance due to its idiosyncratic shock.
VectorXd idiosyncratic_share(const MatrixXd& Gamma, const VectorXd& factor_var, const VectorXd& idio_var);

struct ShockId {
  int factor = 0;      // 0-based column of Gamma
  int sign = 1;        // multiplies the column
  double scale = 1.0;  // impact multiplier
  bool sign_conflict = false;  // output and unemployment loadings share a sign
  bool zero_loading = false;   // output loading exactly zero; scale left at 1
};

/// Picks the factor with the largest mean (output + unemployment) variance
/// share over flagged periods, signs it so output falls on impact and scales
/// it so the output impact equals -output_sd (same units as Gamma).
ShockId identify_bc_shock(const DrawRecord& draw, const std::vector<bool>& flags, int output_var, int unemp_var,
                          double output_sd);

/// Companion matrix of the lag blocks of an M x K coefficient matrix.
MatrixXd companion_matrix(const MatrixXd& coef, const DesignLayout& layout);
double spectral_radius(const MatrixXd& square);

/// Rows h = 0..H-1 of the response to an impact vector; row 0 is the impact.
MatrixXd impulse_response(const MatrixXd& coef, const DesignLayout& layout, const VectorXd& impact, int horizons);

/// Response at time t of one draw to the identified shock.
MatrixXd irf(const DrawRecord& draw, const DesignLayout& layout, Eigen::Index t, const ShockId& shock, int horizons);

/// draws x times x horizons x variables, in raw units.
struct IrfResult {
  int n_draws = 0;
  int n_times = 0;
  int horizons = 0;
  int n_vars = 0;
  std::vector<Eigen::Index> times;
  std::vector<ShockId> shocks;
  std::vector<double> values;
  int n_explosive = 0;  // (draw, time) pairs with companion spectral radius >= 1

  double& at(int d, int ti, int h, int m) { return values[index(d, ti, h, m)]; }
  double at(int d, int ti, int h, int m) const { return values[index(d, ti, h, m)]; }
  std::size_t index(int d, int ti, int h, int m) const {
    return ((static_cast<std::size_t>(d) * n_times + ti) * horizons + h) * n_vars + m;
  }
  void resize(int draws, int n_t, int h, int m) {
    n_draws = draws;
    n_times = n_t;
    horizons = h;
    n_vars = m;
    values.assign(static_cast<std::size_t>(draws) * n_t * h * m, 0.0);
  }
};

/// Identified shocks for every retained draw (output_sd taken from the scaled data).
std::vector<ShockId> identify_all(const PosteriorDraws& post, const std::vector<bool>& flags, int output_var,
                                  int unemp_var);

/// IRFs at the requested time indices for every draw, converted to raw units.
IrfResult compute_irfs(const PosteriorDraws& post, const std::vector<ShockId>& shocks,
                       const std::vector<Eigen::Index>& times, int horizons);

/// Same, with the coefficients replaced by counterfactual ones per draw.
IrfResult compute_scenario_irfs(const PosteriorDraws& post, const std::vector<ShockId>& shocks,
                                const std::vector<MatrixXd>& coefficients, int horizons);

struct IrfSummary {
  MatrixXd lower;   // 16th percentile, horizons x M
  MatrixXd median;
  MatrixXd upper;   // 84th percentile
};

/// Type-7 sample quantile.
double quantile(std::vector<double> values, double p);

/// Average over time within each draw, then quantiles over draws.
IrfSummary average_irf(const IrfResult& result);

/// price(h) / unemployment(h); empty where |unemployment(h)| < tol.
std::vector<std::optional<double>> phillips_multiplier(const VectorXd& irf_price, const VectorXd& irf_unemp,
                                                       double tol = 1e-12);

/// beta*(z) = Lambda F(z) for equation m, idiosyncratic part excluded.
VectorXd scenario_tvp(const DrawRecord& draw, const VectorXd& z_star, int m);
/// A + rows of beta*(z) for every equation.
MatrixXd scenario_coefficients(const DrawRecord& draw, const VectorXd& z_star);

struct WaicResult {
  double waic = 0.0;
  double lpd = 0.0;
  double p_waic = 0.0;
};

/// From a draws x T matrix of pointwise log densities.
WaicResult waic(const MatrixXd& loglik);

}  // namespace tvpbart
