// Domain types shared by every part of the estimator: datasets, the lag
// design, model configuration and response scaling.
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tvpbart {

using Eigen::MatrixXd;
using Eigen::VectorXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class DegenerateScaleError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Raised by validate_config; field() names the offending ModelConfig entry.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

struct Dataset {
  MatrixXd Y;  // T x M endogenous series
  MatrixXd Z;  // T x N effect modifiers
  std::vector<std::string> variable_names;
  std::vector<std::string> modifier_names;
  std::vector<std::string> dates;

  Eigen::Index n_obs() const { return Y.rows(); }
  Eigen::Index n_vars() const { return Y.cols(); }
  Eigen::Index n_modifiers() const { return Z.cols(); }
};

/// How the columns of X were assembled. Structural analysis needs this to
/// recover lag blocks; plain regressions (exogenous X) have no companion form.
struct DesignLayout {
  enum class Kind { Var, Regression };
  Kind kind = Kind::Var;
  int n_vars = 0;  // M
  int lags = 0;    // P (0 for regressions)
  bool intercept = true;
  int n_regressors = 0;  // K

  int lag_column(int lag, int var) const {
    return (intercept ? 1 : 0) + (lag - 1) * n_vars + var;
  }
};

struct DesignData {
  MatrixXd Y;  // usable rows x M
  MatrixXd X;  // usable rows x K
  MatrixXd Z;  // usable rows x N
  std::vector<std::string> dates;
  DesignLayout layout;

  Eigen::Index n_obs() const { return Y.rows(); }
  Eigen::Index n_vars() const { return Y.cols(); }
  Eigen::Index n_regressors() const { return X.cols(); }
  Eigen::Index n_modifiers() const { return Z.cols(); }
};

struct ModelConfig {
  int lags = 5;
  int n_tvp_factors = 25;
  int n_vol_factors = 3;
  int trees_per_tvp_factor = 1;
  int trees_per_vol_factor = 250;
  double alpha = 0.95;
  double zeta = 2.0;
  double kappa = 2.0;
  double process_var_scale = 0.01;
  bool include_intercept = true;
  int n_draws = 15000;
  int n_burn = 5000;
  int thin = 1;
  std::uint64_t seed = 1;
  bool constant_coefficients = false;
  int min_leaf_size = 5;
  bool scale_response = true;
  bool store_tvp = true;

  int retained_draws() const { return (n_draws - n_burn) / thin; }
};

/// Checks every ModelConfig invariant and returns the config unchanged.
/// Throws ConfigError naming the first violated field.
ModelConfig validate_config(const ModelConfig& config);

/// Affine map of a series onto [-0.5, 0.5] using its sample range.
struct Scaler {
  double center = 0.0;
  double half_range = 0.5;

  double forward(double x) const { return (x - center) / (2.0 * half_range); }
  double inverse(double u) const { return center + 2.0 * half_range * u; }
  /// Multiplier taking a difference in scaled units back to raw units.
  double unit() const { return 2.0 * half_range; }

  template <typename Derived>
  auto forward(const Eigen::DenseBase<Derived>& x) const {
    return ((x.derived().array() - center) / (2.0 * half_range)).matrix();
  }
  template <typename Derived>
  auto inverse(const Eigen::DenseBase<Derived>& u) const {
    return (center + 2.0 * half_range * u.derived().array()).matrix();
  }
};

Scaler fit_scaler(const Eigen::Ref<const VectorXd>& series);

/// Identity scaler, used when scaling is switched off.
inline Scaler identity_scaler() { return Scaler{0.0, 0.5}; }

/// Lags the panel: row t of X is (1?, y'_{t-1}, ..., y'_{t-P}); Y, Z and the
/// dates lose their first P rows.
DesignData build_design(const Dataset& dataset, int lags, bool include_intercept);

/// Design for a single- or multi-equation regression on exogenous regressors.
/// An intercept column is prepended when requested.
DesignData make_regression_design(const MatrixXd& Y, const MatrixXd& regressors, const MatrixXd& Z,
                                  bool include_intercept, std::vector<std::string> dates = {});

/// Per-column scalers for Y (identity scalers when disabled). Without an
/// intercept the model cannot absorb a shift, so the scalers only rescale by
/// the largest absolute value.
std::vector<Scaler> fit_scalers(const MatrixXd& Y, bool enabled, bool centered = true);

/// Applies the response scalers to a design. For VAR layouts the lagged
/// regressors are rescaled consistently; regression regressors are left as is.
DesignData scale_design(const DesignData& design, const std::vector<Scaler>& scalers);

/// Maps a coefficient matrix (M x K, intercept first) estimated on scaled data
/// back to raw units.
MatrixXd unscale_coefficients(const MatrixXd& coef, const DesignLayout& layout,
                              const std::vector<Scaler>& scalers);

}  // namespace tvpbart
