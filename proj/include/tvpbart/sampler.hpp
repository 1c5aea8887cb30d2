// The Gibbs sampler. Each sweep runs the per-equation steps (trees with the
// TVPs integrated out, loadings, TVPs, process variances, constant
// coefficients, factor loadings, shrinkage, idiosyncratic volatility) and then
// the cross-equation steps (factors, factor volatilities, shrinkage on the
// factor loadings).
#pragma once

#include "tvpbart/core.hpp"
#include "tvpbart/model_state.hpp"
#include "tvpbart/random.hpp"
#include "tvpbart/tree.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace tvpbart {

/// Scaled design, split-point table and configuration shared by all steps.
struct SamplerContext {
  DesignData design;
  CutTable cuts;
  ModelConfig config;

  SamplerContext(DesignData scaled_design, const ModelConfig& cfg);
  int n_vars() const { return static_cast<int>(design.n_vars()); }
  int n_regressors() const { return static_cast<int>(design.n_regressors()); }
  Eigen::Index n_obs() const { return design.n_obs(); }
  /// False when the TVP block is switched off entirely.
  bool has_tvp() const { return !config.constant_coefficients; }
  TreePrior tvp_prior(int factor) const;
  TreePrior vol_prior() const;
};

inline constexpr double kZeroLoadingTol = 1e-10;
inline constexpr double kMinProcessVar = 1e-10;

struct GaussianPosterior {
  VectorXd mean;
  MatrixXd cov;
};

/// Posterior of coefficients in y = X b + e, e_t ~ N(0, noise_var_t),
/// b ~ N(prior_mean, diag(prior_var)).
GaussianPosterior regression_posterior(const MatrixXd& X, const VectorXd& y, const VectorXd& noise_var,
                                       const VectorXd& prior_mean, const VectorXd& prior_var);

/// Same model, one exact draw (Cholesky of the posterior precision).
VectorXd draw_regression(const MatrixXd& X, const VectorXd& y, const VectorXd& noise_var,
                         const VectorXd& prior_mean, const VectorXd& prior_var, Rng& rng);

// Quantities derived from the current state of equation m.
VectorXd response_less_constant(const ModelState& s, int m, const SamplerContext& ctx);  // y - x'a
VectorXd tvp_marginal_response(const ModelState& s, int m, const SamplerContext& ctx);   // y - x'a - q'gamma
VectorXd tvp_marginal_variance(const ModelState& s, int m, const SamplerContext& ctx);   // x'Vx + sigma^2
/// Target and weights for the trees of factor j in equation m; rows where
/// the factor's loading projection is below tolerance are inactive.
WeightedTarget tvp_tree_target(const ModelState& s, int m, int factor, const SamplerContext& ctx);

GaussianPosterior loadings_posterior(const ModelState& s, int m, const SamplerContext& ctx);
GaussianPosterior tvp_posterior(const ModelState& s, int m, Eigen::Index t, const SamplerContext& ctx);
GaussianPosterior constant_coeff_posterior(const ModelState& s, int m, const SamplerContext& ctx);
GaussianPosterior gamma_posterior(const ModelState& s, int m, const SamplerContext& ctx);
GaussianPosterior factor_posterior(const ModelState& s, Eigen::Index t, const SamplerContext& ctx);
/// T x K innovations beta_t - Lambda F(z_t).
MatrixXd tvp_innovations(const ModelState& s, int m);

// Individual steps. Per-equation steps touch only equation m (and read the
// shared factors), so different equations may run concurrently.
void step1_trees_marginal(ModelState& s, int m, const SamplerContext& ctx, Rng& rng);
void step3_loadings(ModelState& s, int m, const SamplerContext& ctx, Rng& rng);
void step4_tvp(ModelState& s, int m, const SamplerContext& ctx, Rng& rng);
void step5_process_vars(ModelState& s, int m, const SamplerContext& ctx, Rng& rng);
void step6_constant_coeffs(ModelState& s, int m, const SamplerContext& ctx, Rng& rng);
void step7_gamma(ModelState& s, int m, const SamplerContext& ctx, Rng& rng);
void step8_shrink_constant(ModelState& s, int m, Rng& rng);
void step9_shrink_loadings(ModelState& s, int m, Rng& rng);
void step10_idio_vol(ModelState& s, int m, const SamplerContext& ctx, Rng& rng);
void step11_factors(ModelState& s, const SamplerContext& ctx, Rng& rng);
void step_factor_vol(ModelState& s, int factor, const SamplerContext& ctx, Rng& rng);
void step12_shrink_gamma(ModelState& s, Rng& rng);

/// Step identifiers reported to a trace hook. Steps 1 and 2 (tree structure
/// and leaf values) are one call; FactorVol runs between 11 and 12.
enum class Step { Trees = 1, Loadings = 3, Tvp = 4, ProcessVar = 5, Constant = 6, Gamma = 7,
                  ShrinkConstant = 8, ShrinkLoadings = 9, IdioVol = 10, Factors = 11, FactorVol = 13,
                  ShrinkGamma = 12 };
/// Called after each step with (sweep, equation or -1, step).
using StepTrace = std::function<void(std::int64_t, int, Step)>;

/// Deterministic starting point: ridge estimates for the constant
/// coefficients, root-only trees, small random loadings, flat volatilities.
ModelState initial_state(const SamplerContext& ctx, Rng& rng);

/// A draw of every parameter and latent state from the prior.
ModelState draw_from_prior(const SamplerContext& ctx, Rng& rng);

/// y_t drawn from the model given the state (design held fixed).
MatrixXd simulate_response(const ModelState& s, const SamplerContext& ctx, Rng& rng);

struct RunOptions {
  int threads = 1;
  StepTrace trace;  // may be called from worker threads when threads > 1
  std::function<void(int sweep, int total)> progress;
};

/// One sweep over all steps; random streams depend only on (seed, sweep).
void gibbs_sweep(ModelState& s, const SamplerContext& ctx, std::int64_t sweep, const RunOptions& opts = {});

/// Retained parameters of one sweep, in scaled units.
struct DrawRecord {
  int sweep = 0;
  MatrixXd A;                                  // M x K
  MatrixXd Gamma;                              // M x Q_q
  MatrixXd q;                                  // T x Q_q
  MatrixXd R;                                  // T x Q_q factor variances
  MatrixXd Sigma;                              // T x M idiosyncratic variances
  std::vector<MatrixXd> beta;                  // per equation T x K (empty if not stored)
  std::vector<MatrixXd> loadings;              // per equation K x Q_beta
  std::vector<VectorXd> process_var;           // per equation K
  std::vector<std::vector<Ensemble>> tvp_trees;  // per equation, per factor
  VectorXd loglik;                             // T, raw units

  bool has_tvp() const { return !beta.empty(); }
  MatrixXd coefficients_at(Eigen::Index t) const;
};

DrawRecord snapshot(const ModelState& s, const SamplerContext& ctx, bool store_tvp);

/// log N(y_t; C_t x_t, Gamma R_t Gamma' + Sigma_t) for every t, optionally for
/// a subset of variables (marginal density). Scaled units.
VectorXd pointwise_loglik(const DrawRecord& d, const DesignData& design, const std::vector<int>& subset = {});

struct PosteriorDraws {
  ModelConfig config;
  DesignData design;                // raw units
  std::vector<Scaler> scalers;
  std::vector<DrawRecord> draws;
  std::vector<MoveCounts> tvp_moves;  // per equation, summed over sweeps
  MoveCounts vol_moves;
  double seconds = 0.0;

  /// draws x T log densities in raw units.
  MatrixXd loglik() const;
  /// Recomputes the log densities for a subset of variables (raw units).
  MatrixXd loglik_subset(const std::vector<int>& subset) const;
  /// Sum of log unit multipliers for a subset (all variables if empty).
  double log_jacobian(const std::vector<int>& subset = {}) const;
};

/// Full estimation on a prepared raw design; scaling is applied internally
/// according to the configuration.
PosteriorDraws run_mcmc(const ModelConfig& config, const DesignData& design, const RunOptions& opts = {});

/// Convenience overload: builds the lag design from the panel first.
PosteriorDraws run_mcmc(const ModelConfig& config, const Dataset& dataset, const RunOptions& opts = {});

}  // namespace tvpbart
