// Horseshoe shrinkage with inverse-Gamma auxiliaries, and generalized inverse
// Gaussian draws for the process variances.
#pragma once

#include "tvpbart/core.hpp"
#include "tvpbart/random.hpp"

#include <vector>

namespace tvpbart {

/// Local/global horseshoe scales for a block of coefficients. Coefficient i
/// has prior variance local[i] * global[group[i]].
struct HorseshoeBlock {
  VectorXd local;       // local scales (squared)
  VectorXd local_aux;   // one auxiliary per local scale
  VectorXd global;      // one global scale (squared) per group
  VectorXd global_aux;  // one auxiliary per global scale
  std::vector<int> group;

  Eigen::Index size() const { return local.size(); }
  int n_groups() const { return static_cast<int>(global.size()); }
  VectorXd prior_variance() const;
};

/// All scales and auxiliaries at 1, a single global scale.
HorseshoeBlock make_horseshoe(Eigen::Index n);

/// Block for a rows x cols matrix stored column-major, one global per column.
HorseshoeBlock make_column_horseshoe(Eigen::Index rows, Eigen::Index cols);

// The four conditional updates, usable on their own for testing.
void sample_local_aux(HorseshoeBlock& block, Rng& rng);
void sample_global_aux(HorseshoeBlock& block, Rng& rng);
void sample_local_scales(HorseshoeBlock& block, const Eigen::Ref<const VectorXd>& coeffs, Rng& rng);
void sample_global_scales(HorseshoeBlock& block, const Eigen::Ref<const VectorXd>& coeffs, Rng& rng);

/// One full horseshoe update: auxiliaries, then local scales, then globals.
void sample_horseshoe(HorseshoeBlock& block, const Eigen::Ref<const VectorXd>& coeffs, Rng& rng);

/// Draw from the density proportional to x^{lambda-1} exp(-(chi/x + psi x)/2).
double sample_gig(double lambda, double chi, double psi, Rng& rng);

/// v^2 | eta ~ GIG(1/2 - T/2, sum eta^2, 1/(2 B_v)).
double sample_process_variance(const Eigen::Ref<const VectorXd>& eta, double process_var_scale, Rng& rng);

}  // namespace tvpbart
