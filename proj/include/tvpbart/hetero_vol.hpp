// Volatility samplers. Factor variances are sums of trees on the log scale
// (heteroBART), fitted through the log-square mixture linearization;
// idiosyncratic variances follow AR(1) stochastic volatility.
#pragma once

#include "tvpbart/core.hpp"
#include "tvpbart/random.hpp"
#include "tvpbart/tree.hpp"

#include <cmath>
#include <vector>

namespace tvpbart {

/// Gaussian mixture approximating the log of a chi-square(1) variate.
struct MixtureTable {
  std::vector<double> weight;
  std::vector<double> mean;
  std::vector<double> variance;

  /// The ten-component table of Omori, Chib, Shephard and Nakajima (2007).
  static const MixtureTable& omori();

  int size() const { return static_cast<int>(weight.size()); }
  double mixture_mean() const;
  double mixture_variance() const;
};

inline constexpr double kLogSquareOffset = 1e-6;

/// log(q^2 + offset).
inline double linearize(double q, double offset = kLogSquareOffset) { return std::log(q * q + offset); }

/// Draws component indicators with P(i) proportional to
/// weight_i N(resid_t; fit_t + mean_i, variance_i), normalized in log space.
std::vector<int> sample_mixture_indicators(const Eigen::Ref<const VectorXd>& resid, const Eigen::Ref<const VectorXd>& fit,
                                           const MixtureTable& table, Rng& rng);

struct FactorVolState {
  Ensemble ensemble;
  std::vector<int> indicators;
  double offset = kLogSquareOffset;
};

template <typename Row>
double factor_variance(const FactorVolState& state, const Row& z) {
  return std::exp(evaluate_ensemble(state.ensemble, z));
}

/// r(z_t) at every row of Z.
VectorXd factor_variances(const FactorVolState& state, const MatrixXd& Z);

/// Redraws the indicators, then backfits the variance trees on
/// log(q^2 + offset) - mean_i with noise variance variance_i.
void heterobart_sweep(FactorVolState& state, const Eigen::Ref<const VectorXd>& q, const CutTable& cuts, Rng& rng,
                      MoveCounts* counts = nullptr, const MixtureTable& table = MixtureTable::omori());

struct SvPrior {
  double mu_mean = 0.0;
  double mu_var = 10.0;
  double phi_a = 25.0;  // Beta prior on (phi + 1) / 2
  double phi_b = 5.0;
  double sigma2_shape = 0.5;  // Gamma prior, rate form; the GIG update assumes rate 1/2
  double sigma2_rate = 0.5;
};

/// h_1 ~ N(mu, sigma2 / (1 - phi^2)), h_t = mu + phi (h_{t-1} - mu) + N(0, sigma2).
struct SvState {
  VectorXd h;
  double mu = 0.0;
  double phi = 0.9;
  double sigma2 = 0.1;
  std::vector<int> indicators;
  double offset = kLogSquareOffset;
};

/// Starting state with a flat path at the log of the residual variance.
SvState make_sv_state(const Eigen::Ref<const VectorXd>& resid);

// Sub-steps of sample_idio_sv. `ystar` is log(resid^2 + offset).
void sv_sample_indicators(const Eigen::Ref<const VectorXd>& ystar, SvState& state, const MixtureTable& table, Rng& rng);
void sv_sample_path(const Eigen::Ref<const VectorXd>& ystar, SvState& state, const MixtureTable& table, Rng& rng);
void sv_sample_mu(SvState& state, const SvPrior& prior, Rng& rng);
void sv_sample_phi(SvState& state, const SvPrior& prior, Rng& rng);
void sv_sample_sigma2(SvState& state, const SvPrior& prior, Rng& rng);

/// Kalman-filtered and smoothed means of h given fixed indicators and
/// parameters (no sampling).
VectorXd sv_smoothed_path(const Eigen::Ref<const VectorXd>& ystar, const SvState& state, const MixtureTable& table);

/// Indicators, then the log-variance path by forward filtering backward
/// sampling, then level, persistence and innovation variance.
void sample_idio_sv(const Eigen::Ref<const VectorXd>& resid, SvState& state, Rng& rng, const SvPrior& prior = {},
                    const MixtureTable& table = MixtureTable::omori());

}  // namespace tvpbart
