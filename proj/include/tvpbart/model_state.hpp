// One configuration of every parameter and latent state of the model.
// Everything is expressed in the scaled units the sampler works in.
#pragma once

#include "tvpbart/core.hpp"
#include "tvpbart/hetero_vol.hpp"
#include "tvpbart/shrinkage.hpp"
#include "tvpbart/tree.hpp"

#include <vector>

namespace tvpbart {

/// Per-equation block: y_mt = x_t'a + x_t'beta_t + q_t'gamma + eps_t with
/// beta_t = Lambda F(z_t) + eta_t, eta_t ~ N(0, diag(process_var)).
struct EquationState {
  VectorXd a;                       // K constant coefficients
  MatrixXd beta;                    // T x K time-varying coefficients
  MatrixXd loadings;                // K x Q_beta
  VectorXd process_var;             // K
  std::vector<Ensemble> tvp_trees;  // Q_beta ensembles; ensemble j uses factor index j + 1
  MatrixXd factor_fit;              // T x Q_beta cache of F(z_t)
  SvState sv;                       // log sigma^2_t and its AR(1) parameters
  HorseshoeBlock shrink_a;          // one global scale
  HorseshoeBlock shrink_loadings;   // one global per column of the loadings
  MoveCounts moves;

  VectorXd idio_var() const { return sv.h.array().exp().matrix(); }
  /// Prior mean of beta_t: row t is (Lambda F(z_t))'.
  MatrixXd tvp_prior_mean() const { return factor_fit * loadings.transpose(); }
};

struct ModelState {
  std::vector<EquationState> eq;
  MatrixXd Gamma;                   // M x Q_q error-factor loadings
  MatrixXd q;                       // T x Q_q factors
  std::vector<FactorVolState> vol;  // Q_q heteroBART variance ensembles
  MatrixXd vol_logvar;              // T x Q_q cache of log r_s(z_t)
  HorseshoeBlock shrink_gamma;      // one global per column of Gamma
  MoveCounts vol_moves;

  int n_vars() const { return static_cast<int>(eq.size()); }
  MatrixXd factor_var() const { return vol_logvar.array().exp().matrix(); }
  MatrixXd idio_var() const;  // T x M
  MatrixXd A() const;         // M x K
  /// Total coefficients at time t, M x K (intercept first).
  MatrixXd coefficients_at(Eigen::Index t) const;
};

}  // namespace tvpbart
