#include "tvpbart/core.hpp"

#include <cmath>
#include <sstream>

namespace tvpbart {

ModelConfig validate_config(const ModelConfig& c) {
  auto fail = [](const char* field, const std::string& msg) { throw ConfigError(field, msg); };
  if (c.lags < 0) fail("P", "lag order must be non-negative");
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) fail("alpha", "must lie in (0, 1)");
  if (!(c.zeta > 1.0)) fail("zeta", "must exceed 1");
  if (c.n_tvp_factors < 0) fail("Q_beta", "must be >= 0");
  if (c.n_vol_factors < 1) fail("Q_q", "must be >= 1");
  if (c.trees_per_tvp_factor < 1) fail("S_beta", "must be >= 1");
  if (c.trees_per_vol_factor < 1) fail("S_q", "must be >= 1");
  if (!(c.process_var_scale > 0.0)) fail("B_v", "must be positive");
  if (!(c.kappa > 0.0)) fail("kappa", "must be positive");
  if (c.n_draws < 1) fail("n_draws", "must be positive");
  if (c.n_burn < 0) fail("n_burn", "burn-in must be non-negative");
  if (c.n_burn >= c.n_draws) fail("n_burn", "burn-in must be smaller than n_draws");
  if (c.thin < 1) fail("thin", "must be >= 1");
  if (c.min_leaf_size < 1) fail("n_min", "must be >= 1");
  return c;
}

Scaler fit_scaler(const Eigen::Ref<const VectorXd>& series) {
  if (series.size() < 2) throw DegenerateScaleError("scaler needs at least two observations");
  const double lo = series.minCoeff();
  const double hi = series.maxCoeff();
  if (!(hi > lo)) throw DegenerateScaleError("series is constant; cannot scale");
  return Scaler{0.5 * (lo + hi), 0.5 * (hi - lo)};
}

std::vector<Scaler> fit_scalers(const MatrixXd& Y, bool enabled, bool centered) {
  std::vector<Scaler> out;
  out.reserve(static_cast<std::size_t>(Y.cols()));
  for (Eigen::Index m = 0; m < Y.cols(); ++m) {
    if (!enabled) {
      out.push_back(identity_scaler());
    } else if (centered) {
      out.push_back(fit_scaler(Y.col(m)));
    } else {
      const double amax = Y.col(m).cwiseAbs().maxCoeff();
      if (!(amax > 0.0)) throw DegenerateScaleError("series is identically zero; cannot scale");
      out.push_back(Scaler{0.0, amax});
    }
  }
  return out;
}

DesignData build_design(const Dataset& dataset, int lags, bool include_intercept) {
  const Eigen::Index T = dataset.n_obs();
  const Eigen::Index M = dataset.n_vars();
  if (lags < 1) throw DimensionError("VAR design needs at least one lag");
  if (T < lags + 2) {
    std::ostringstream os;
    os << "panel has " << T << " rows; at least " << lags + 2 << " are needed for " << lags << " lags";
    throw DimensionError(os.str());
  }
  if (dataset.Z.rows() != T) throw DimensionError("Y and Z must have the same number of rows");
  if (!dataset.dates.empty() && static_cast<Eigen::Index>(dataset.dates.size()) != T)
    throw DimensionError("dates must match the number of rows");

  const Eigen::Index usable = T - lags;
  const int offset = include_intercept ? 1 : 0;
  const Eigen::Index K = offset + M * lags;

  DesignData d;
  d.Y = dataset.Y.bottomRows(usable);
  d.Z = dataset.Z.bottomRows(usable);
  d.X.resize(usable, K);
  if (include_intercept) d.X.col(0).setOnes();
  for (int p = 1; p <= lags; ++p)
    d.X.block(0, offset + (p - 1) * M, usable, M) = dataset.Y.middleRows(lags - p, usable);
  if (!dataset.dates.empty()) d.dates.assign(dataset.dates.begin() + lags, dataset.dates.end());
  d.layout = DesignLayout{DesignLayout::Kind::Var, static_cast<int>(M), lags, include_intercept,
                          static_cast<int>(K)};
  return d;
}

DesignData make_regression_design(const MatrixXd& Y, const MatrixXd& regressors, const MatrixXd& Z,
                                  bool include_intercept, std::vector<std::string> dates) {
  const Eigen::Index T = Y.rows();
  if (regressors.rows() != T || Z.rows() != T)
    throw DimensionError("response, regressors and modifiers must share rows");
  if (T < 2) throw DimensionError("regression needs at least two observations");
  const int offset = include_intercept ? 1 : 0;
  DesignData d;
  d.Y = Y;
  d.Z = Z;
  d.X.resize(T, regressors.cols() + offset);
  if (include_intercept) d.X.col(0).setOnes();
  d.X.rightCols(regressors.cols()) = regressors;
  d.dates = std::move(dates);
  d.layout = DesignLayout{DesignLayout::Kind::Regression, static_cast<int>(Y.cols()), 0,
                          include_intercept, static_cast<int>(d.X.cols())};
  return d;
}

DesignData scale_design(const DesignData& design, const std::vector<Scaler>& scalers) {
  if (static_cast<Eigen::Index>(scalers.size()) != design.n_vars())
    throw DimensionError("one scaler per response is required");
  DesignData out = design;
  const int M = design.layout.n_vars;
  for (int m = 0; m < M; ++m) out.Y.col(m) = scalers[m].forward(design.Y.col(m));
  if (design.layout.kind == DesignLayout::Kind::Var) {
    for (int p = 1; p <= design.layout.lags; ++p)
      for (int m = 0; m < M; ++m) {
        const int col = design.layout.lag_column(p, m);
        out.X.col(col) = scalers[m].forward(design.X.col(col));
      }
  }
  return out;
}

MatrixXd unscale_coefficients(const MatrixXd& coef, const DesignLayout& layout,
                              const std::vector<Scaler>& scalers) {
  const int M = layout.n_vars;
  if (coef.rows() != M || coef.cols() != layout.n_regressors)
    throw DimensionError("coefficient matrix does not match the design layout");
  VectorXd unit(M), center(M);
  for (int m = 0; m < M; ++m) {
    unit(m) = scalers[m].unit();
    center(m) = scalers[m].center;
  }
  MatrixXd raw = coef;
  if (layout.kind == DesignLayout::Kind::Regression) {
    for (int m = 0; m < M; ++m) raw.row(m) *= unit(m);
    if (layout.intercept) raw.col(0) += center;
    return raw;
  }
  // y_raw = c + D y_s  =>  lag blocks D C_p D^{-1}, intercept c + D a0 - sum_p D C_p D^{-1} c.
  VectorXd intercept = center;
  if (layout.intercept) intercept += unit.asDiagonal() * coef.col(0);
  for (int p = 1; p <= layout.lags; ++p) {
    const int off = layout.lag_column(p, 0);
    MatrixXd block = unit.asDiagonal() * coef.block(0, off, M, M) * unit.cwiseInverse().asDiagonal();
    raw.block(0, off, M, M) = block;
    intercept -= block * center;
  }
  if (layout.intercept) raw.col(0) = intercept;
  return raw;
}

}  // namespace tvpbart
