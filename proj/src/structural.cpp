#include "tvpbart/structural.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace tvpbart {

MatrixXd variance_shares(const MatrixXd& Gamma, const VectorXd& factor_var, const VectorXd& idio_var) {
  if (Gamma.cols() != factor_var.size() || Gamma.rows() != idio_var.size())
    throw DimensionError("variance share inputs have inconsistent sizes");
  const MatrixXd parts = Gamma.array().square().rowwise() * factor_var.transpose().array();
  const VectorXd total = parts.rowwise().sum() + idio_var;
  if ((total.array() <= 0.0).any()) throw NumericalError("zero total variance in variance share");
  return parts.array().colwise() / total.array();
}

VectorXd variance_share(const MatrixXd& Gamma, const VectorXd& factor_var, const VectorXd& idio_var, int factor) {
  return variance_shares(Gamma, factor_var, idio_var).col(factor);
}

VectorXd idiosyncratic_share(const MatrixXd& Gamma, const VectorXd& factor_var, const VectorXd& idio_var) {
  const MatrixXd parts = Gamma.array().square().rowwise() * factor_var.transpose().array();
  const VectorXd total = parts.rowwise().sum() + idio_var;
  return idio_var.cwiseQuotient(total);
}

ShockId identify_bc_shock(const DrawRecord& draw, const std::vector<bool>& flags, int output_var, int unemp_var,
                          double output_sd) {
  const Eigen::Index T = draw.R.rows();
  if (static_cast<Eigen::Index>(flags.size()) != T) throw DimensionError("one flag per period is required");
  const Eigen::Index Q = draw.Gamma.cols();
  VectorXd score = VectorXd::Zero(Q);
  int n_flagged = 0;
  for (Eigen::Index t = 0; t < T; ++t) {
    if (!flags[static_cast<std::size_t>(t)]) continue;
    const MatrixXd shares = variance_shares(draw.Gamma, draw.R.row(t).transpose(), draw.Sigma.row(t).transpose());
    score += (shares.row(output_var) + shares.row(unemp_var)).transpose();
    ++n_flagged;
  }
  if (n_flagged == 0) throw Error("shock identification needs at least one flagged period");

  ShockId id;
  score.maxCoeff(&id.factor);
  const double g_out = draw.Gamma(output_var, id.factor);
  const double g_un = draw.Gamma(unemp_var, id.factor);
  id.sign = g_out > 0.0 ? -1 : 1;
  id.sign_conflict = g_out * g_un > 0.0;
  if (g_out == 0.0) {
    id.zero_loading = true;
    id.scale = 1.0;
  } else {
    id.scale = output_sd / std::abs(g_out);
  }
  return id;
}

MatrixXd companion_matrix(const MatrixXd& coef, const DesignLayout& layout) {
  if (layout.kind != DesignLayout::Kind::Var) throw DimensionError("impulse responses need a VAR design");
  const int M = layout.n_vars;
  const int P = layout.lags;
  if (coef.rows() != M || coef.cols() != layout.n_regressors) throw DimensionError("coefficients do not match layout");
  MatrixXd C = MatrixXd::Zero(M * P, M * P);
  for (int p = 1; p <= P; ++p) C.block(0, (p - 1) * M, M, M) = coef.block(0, layout.lag_column(p, 0), M, M);
  if (P > 1) C.block(M, 0, M * (P - 1), M * (P - 1)).setIdentity();
  return C;
}

double spectral_radius(const MatrixXd& square) {
  if (square.size() == 0) return 0.0;
  Eigen::EigenSolver<MatrixXd> es(square, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

MatrixXd impulse_response(const MatrixXd& coef, const DesignLayout& layout, const VectorXd& impact, int horizons) {
  const int M = layout.n_vars;
  if (impact.size() != M) throw DimensionError("impact vector must have one entry per variable");
  if (horizons < 1) throw DimensionError("at least one horizon is required");
  const MatrixXd C = companion_matrix(coef, layout);
  MatrixXd out(horizons, M);
  VectorXd state = VectorXd::Zero(C.rows());
  state.head(M) = impact;
  for (int h = 0; h < horizons; ++h) {
    out.row(h) = state.head(M).transpose();
    state = C * state;
  }
  return out;
}

MatrixXd irf(const DrawRecord& draw, const DesignLayout& layout, Eigen::Index t, const ShockId& shock, int horizons) {
  const VectorXd impact = shock.sign * shock.scale * draw.Gamma.col(shock.factor);
  return impulse_response(draw.coefficients_at(t), layout, impact, horizons);
}

std::vector<ShockId> identify_all(const PosteriorDraws& post, const std::vector<bool>& flags, int output_var,
                                  int unemp_var) {
  const DesignData scaled = scale_design(post.design, post.scalers);
  const VectorXd y = scaled.Y.col(output_var);
  const double n = static_cast<double>(y.size());
  const double sd = std::sqrt((y.array() - y.mean()).square().sum() / (n - 1.0));
  std::vector<ShockId> out;
  out.reserve(post.draws.size());
  for (const auto& d : post.draws) out.push_back(identify_bc_shock(d, flags, output_var, unemp_var, sd));
  return out;
}

namespace {

void fill_irfs(IrfResult& res, const PosteriorDraws& post, int d, int ti, const MatrixXd& coef, const ShockId& shock) {
  const auto& layout = post.design.layout;
  const DrawRecord& draw = post.draws[static_cast<std::size_t>(d)];
  const VectorXd impact = shock.sign * shock.scale * draw.Gamma.col(shock.factor);
  const MatrixXd r = impulse_response(coef, layout, impact, res.horizons);
  for (int h = 0; h < res.horizons; ++h)
    for (int m = 0; m < res.n_vars; ++m) res.at(d, ti, h, m) = r(h, m) * post.scalers[static_cast<std::size_t>(m)].unit();
  if (spectral_radius(companion_matrix(coef, layout)) >= 1.0) ++res.n_explosive;
}

}  // namespace

IrfResult compute_irfs(const PosteriorDraws& post, const std::vector<ShockId>& shocks,
                       const std::vector<Eigen::Index>& times, int horizons) {
  if (shocks.size() != post.draws.size()) throw DimensionError("one shock label per draw is required");
  IrfResult res;
  res.resize(static_cast<int>(post.draws.size()), static_cast<int>(times.size()), horizons,
             static_cast<int>(post.design.n_vars()));
  res.times = times;
  res.shocks = shocks;
  for (int d = 0; d < res.n_draws; ++d) {
    const DrawRecord& draw = post.draws[static_cast<std::size_t>(d)];
    if (!draw.has_tvp() && !post.config.constant_coefficients)
      throw Error("time-varying impulse responses need stored TVP paths (store_tvp)");
    for (int ti = 0; ti < res.n_times; ++ti) {
      const Eigen::Index t = times[static_cast<std::size_t>(ti)];
      if (t < 0 || t >= post.design.n_obs()) throw DimensionError("time index out of range");
      fill_irfs(res, post, d, ti, draw.coefficients_at(t), shocks[static_cast<std::size_t>(d)]);
    }
  }
  return res;
}

IrfResult compute_scenario_irfs(const PosteriorDraws& post, const std::vector<ShockId>& shocks,
                                const std::vector<MatrixXd>& coefficients, int horizons) {
  if (shocks.size() != post.draws.size() || coefficients.size() != post.draws.size())
    throw DimensionError("one shock label and coefficient matrix per draw is required");
  IrfResult res;
  res.resize(static_cast<int>(post.draws.size()), 1, horizons, static_cast<int>(post.design.n_vars()));
  res.times = {-1};
  res.shocks = shocks;
  for (int d = 0; d < res.n_draws; ++d)
    fill_irfs(res, post, d, 0, coefficients[static_cast<std::size_t>(d)], shocks[static_cast<std::size_t>(d)]);
  return res;
}

double quantile(std::vector<double> v, double p) {
  if (v.empty()) throw DimensionError("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

IrfSummary average_irf(const IrfResult& r) {
  IrfSummary s{MatrixXd(r.horizons, r.n_vars), MatrixXd(r.horizons, r.n_vars), MatrixXd(r.horizons, r.n_vars)};
  std::vector<double> per_draw(static_cast<std::size_t>(r.n_draws));
  for (int h = 0; h < r.horizons; ++h) {
    for (int m = 0; m < r.n_vars; ++m) {
      for (int d = 0; d < r.n_draws; ++d) {
        double total = 0.0;
        for (int ti = 0; ti < r.n_times; ++ti) total += r.at(d, ti, h, m);
        per_draw[static_cast<std::size_t>(d)] = total / r.n_times;
      }
      s.lower(h, m) = quantile(per_draw, 0.16);
      s.median(h, m) = quantile(per_draw, 0.50);
      s.upper(h, m) = quantile(per_draw, 0.84);
    }
  }
  return s;
}

std::vector<std::optional<double>> phillips_multiplier(const VectorXd& irf_price, const VectorXd& irf_unemp, double tol) {
  if (irf_price.size() != irf_unemp.size()) throw DimensionError("IRFs must have the same number of horizons");
  std::vector<std::optional<double>> out(static_cast<std::size_t>(irf_price.size()));
  for (Eigen::Index h = 0; h < irf_price.size(); ++h)
    if (std::abs(irf_unemp(h)) >= tol) out[static_cast<std::size_t>(h)] = irf_price(h) / irf_unemp(h);
  return out;
}

VectorXd scenario_tvp(const DrawRecord& draw, const VectorXd& z_star, int m) {
  const MatrixXd& lam = draw.loadings.at(static_cast<std::size_t>(m));
  const auto& ensembles = draw.tvp_trees.at(static_cast<std::size_t>(m));
  VectorXd F(static_cast<Eigen::Index>(ensembles.size()));
  for (std::size_t j = 0; j < ensembles.size(); ++j) F(static_cast<Eigen::Index>(j)) = evaluate_ensemble(ensembles[j], z_star);
  if (lam.cols() != F.size()) return VectorXd::Zero(lam.rows());
  return lam * F;
}

MatrixXd scenario_coefficients(const DrawRecord& draw, const VectorXd& z_star) {
  MatrixXd out = draw.A;
  for (Eigen::Index m = 0; m < out.rows(); ++m)
    if (static_cast<std::size_t>(m) < draw.loadings.size()) out.row(m) += scenario_tvp(draw, z_star, static_cast<int>(m)).transpose();
  return out;
}

WaicResult waic(const MatrixXd& loglik) {
  const Eigen::Index S = loglik.rows();
  if (S < 2) throw DimensionError("WAIC needs at least two draws");
  WaicResult r;
  for (Eigen::Index t = 0; t < loglik.cols(); ++t) {
    const auto col = loglik.col(t);
    const double top = col.maxCoeff();
    r.lpd += top + std::log((col.array() - top).exp().sum() / static_cast<double>(S));
    const double mean = col.mean();
    r.p_waic += (col.array() - mean).square().sum() / static_cast<double>(S - 1);
  }
  r.waic = -2.0 * (r.lpd - r.p_waic);
  return r;
}

}  // namespace tvpbart
