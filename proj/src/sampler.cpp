#include "tvpbart/sampler.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <thread>

namespace tvpbart {

namespace {

constexpr double kMinPriorVar = 1e-200;
constexpr double kMaxPriorVar = 1e200;

Eigen::LLT<MatrixXd> factorize(const MatrixXd& prec, const char* what) {
  Eigen::LLT<MatrixXd> llt(prec);
  if (llt.info() != Eigen::Success) throw NumericalError(std::string("posterior precision not positive definite in ") + what);
  return llt;
}

VectorXd draw_from_precision(const Eigen::LLT<MatrixXd>& llt, const VectorXd& b, Rng& rng) {
  VectorXd mean = llt.solve(b);
  VectorXd z = rng.normal_vector(b.size());
  return mean + llt.matrixU().solve(z);
}

// Row-wise x_t' beta_t; zero when the TVP block is switched off.
VectorXd tvp_contribution(const MatrixXd& X, const MatrixXd& beta) {
  if (beta.rows() != X.rows()) return VectorXd::Zero(X.rows());
  return (X.array() * beta.array()).rowwise().sum().matrix();
}

VectorXd clamp_prior_var(VectorXd v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = std::clamp(v(i), kMinPriorVar, kMaxPriorVar);
  return v;
}

VectorXd gamma_prior_var(const ModelState& s, int m) {
  const int M = s.n_vars();
  const Eigen::Index Q = s.Gamma.cols();
  VectorXd pv(Q);
  for (Eigen::Index j = 0; j < Q; ++j)
    pv(j) = s.shrink_gamma.local(j * M + m) * s.shrink_gamma.global(j);
  return clamp_prior_var(pv);
}

void draw_horseshoe_prior(HorseshoeBlock& b, Rng& rng) {
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    b.local_aux(i) = rng.inv_gamma(0.5, 1.0);
    b.local(i) = rng.inv_gamma(0.5, 1.0 / b.local_aux(i));
  }
  for (int g = 0; g < b.n_groups(); ++g) {
    b.global_aux(g) = rng.inv_gamma(0.5, 1.0);
    b.global(g) = rng.inv_gamma(0.5, 1.0 / b.global_aux(g));
  }
}

VectorXd normal_with_var(const VectorXd& var, Rng& rng) {
  VectorXd out(var.size());
  for (Eigen::Index i = 0; i < var.size(); ++i) out(i) = rng.normal(0.0, std::sqrt(var(i)));
  return out;
}

}  // namespace

SamplerContext::SamplerContext(DesignData scaled_design, const ModelConfig& cfg)
    : design(std::move(scaled_design)), config(validate_config(cfg)) {
  if (design.Z.rows() != design.Y.rows() || design.X.rows() != design.Y.rows())
    throw DimensionError("Y, X and Z must share rows");
  if (design.Z.cols() < 1) throw DimensionError("at least one effect modifier is required");
  cuts = CutTable(design.Z);
}

TreePrior SamplerContext::tvp_prior(int factor) const {
  return TreePrior{config.alpha, config.zeta, factor + 1, config.min_leaf_size};
}

TreePrior SamplerContext::vol_prior() const {
  return TreePrior{config.alpha, config.zeta, 1, config.min_leaf_size};
}

MatrixXd ModelState::idio_var() const {
  MatrixXd out(eq.empty() ? 0 : eq[0].sv.h.size(), n_vars());
  for (int m = 0; m < n_vars(); ++m) out.col(m) = eq[m].idio_var();
  return out;
}

MatrixXd ModelState::A() const {
  MatrixXd out(n_vars(), eq.empty() ? 0 : eq[0].a.size());
  for (int m = 0; m < n_vars(); ++m) out.row(m) = eq[m].a.transpose();
  return out;
}

MatrixXd ModelState::coefficients_at(Eigen::Index t) const {
  MatrixXd out = A();
  for (int m = 0; m < n_vars(); ++m)
    if (eq[m].beta.rows() > t) out.row(m) += eq[m].beta.row(t);
  return out;
}

namespace {

// Regression in prior-standardised coordinates b = s .* u with s the prior
// sd, so the precision of u is X_s' W X_s + I. When the prior is very flat in
// some directions the Gram part can swamp the identity in floating point and
// Cholesky fails; the eigendecomposition (negative rounding clamped to zero)
// then serves as the fallback.
struct StandardisedSystem {
  VectorXd scale;
  VectorXd mean_u;
  MatrixXd root;  // covariance of u is root root'
  bool upper = false;  // root holds the Cholesky factor U of the precision
  Eigen::LLT<MatrixXd> llt;

  VectorXd noise(Rng& rng) const {
    const VectorXd z = rng.normal_vector(mean_u.size());
    if (upper) return llt.matrixU().solve(z);
    return root * z;
  }
  MatrixXd cov_u() const {
    if (upper) return llt.solve(MatrixXd::Identity(mean_u.size(), mean_u.size()));
    return root * root.transpose();
  }
};

StandardisedSystem standardise(const MatrixXd& X, const VectorXd& y, const VectorXd& noise_var,
                               const VectorXd& prior_mean, const VectorXd& prior_var) {
  StandardisedSystem sys;
  sys.scale = clamp_prior_var(prior_var).cwiseSqrt();
  const VectorXd w = noise_var.cwiseInverse();
  const MatrixXd Xs = X * sys.scale.asDiagonal();
  MatrixXd gram = Xs.transpose() * w.asDiagonal() * Xs;
  const VectorXd rhs = Xs.transpose() * w.cwiseProduct(y) + prior_mean.cwiseQuotient(sys.scale);
  if (!gram.allFinite() || !rhs.allFinite()) throw NumericalError("non-finite regression system");
  MatrixXd prec = gram;
  prec.diagonal().array() += 1.0;
  sys.llt.compute(prec);
  if (sys.llt.info() == Eigen::Success) {
    sys.upper = true;
    sys.mean_u = sys.llt.solve(rhs);
    return sys;
  }
  const Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed in regression");
  const VectorXd inv = (es.eigenvalues().cwiseMax(0.0).array() + 1.0).inverse().matrix();
  sys.mean_u = es.eigenvectors() * inv.asDiagonal() * (es.eigenvectors().transpose() * rhs);
  sys.root = es.eigenvectors() * inv.cwiseSqrt().asDiagonal();
  return sys;
}

}  // namespace

GaussianPosterior regression_posterior(const MatrixXd& X, const VectorXd& y, const VectorXd& noise_var,
                                       const VectorXd& prior_mean, const VectorXd& prior_var) {
  const StandardisedSystem sys = standardise(X, y, noise_var, prior_mean, prior_var);
  GaussianPosterior out;
  out.mean = sys.scale.cwiseProduct(sys.mean_u);
  out.cov = sys.scale.asDiagonal() * sys.cov_u() * sys.scale.asDiagonal();
  return out;
}

VectorXd draw_regression(const MatrixXd& X, const VectorXd& y, const VectorXd& noise_var, const VectorXd& prior_mean,
                         const VectorXd& prior_var, Rng& rng) {
  const StandardisedSystem sys = standardise(X, y, noise_var, prior_mean, prior_var);
  return sys.scale.cwiseProduct(sys.mean_u + sys.noise(rng));
}

VectorXd response_less_constant(const ModelState& s, int m, const SamplerContext& ctx) {
  return ctx.design.Y.col(m) - ctx.design.X * s.eq[m].a;
}

VectorXd tvp_marginal_response(const ModelState& s, int m, const SamplerContext& ctx) {
  return response_less_constant(s, m, ctx) - s.q * s.Gamma.row(m).transpose();
}

VectorXd tvp_marginal_variance(const ModelState& s, int m, const SamplerContext& ctx) {
  const auto& e = s.eq[m];
  const MatrixXd& X = ctx.design.X;
  VectorXd xvx = (X.array().square().matrix() * e.process_var);
  return xvx + e.idio_var();
}

WeightedTarget tvp_tree_target(const ModelState& s, int m, int factor, const SamplerContext& ctx) {
  const auto& e = s.eq[m];
  const Eigen::Index T = ctx.n_obs();
  const VectorXd ystar = tvp_marginal_response(s, m, ctx);
  const VectorXd base_var = tvp_marginal_variance(s, m, ctx);
  const MatrixXd xt = ctx.design.X * e.loadings;  // T x Q_beta
  const VectorXd others = (xt.array() * e.factor_fit.array()).rowwise().sum().matrix() -
                          xt.col(factor).cwiseProduct(e.factor_fit.col(factor));
  WeightedTarget target{VectorXd::Zero(T), VectorXd::Ones(T), std::vector<unsigned char>(static_cast<std::size_t>(T), 1)};
  for (Eigen::Index t = 0; t < T; ++t) {
    const double x = xt(t, factor);
    if (std::abs(x) < kZeroLoadingTol) {
      target.active[static_cast<std::size_t>(t)] = 0;
      continue;
    }
    target.response(t) = (ystar(t) - others(t)) / x;
    target.variance(t) = base_var(t) / (x * x);
  }
  return target;
}

namespace {

MatrixXd loadings_design(const MatrixXd& X, const MatrixXd& F) {
  const Eigen::Index T = X.rows(), K = X.cols(), Q = F.cols();
  MatrixXd D(T, K * Q);
  for (Eigen::Index j = 0; j < Q; ++j) D.middleCols(j * K, K) = F.col(j).asDiagonal() * X;
  return D;
}

struct TvpBlock {
  MatrixXd prec;
  VectorXd b;
};

TvpBlock tvp_block(const ModelState& s, int m, Eigen::Index t, const SamplerContext& ctx, const VectorXd& resid,
                   const VectorXd& sigma2, const MatrixXd& prior_mean) {
  const auto& e = s.eq[m];
  const VectorXd x = ctx.design.X.row(t).transpose();
  TvpBlock blk;
  blk.prec = x * x.transpose() / sigma2(t);
  blk.prec.diagonal() += e.process_var.cwiseInverse();
  blk.b = x * (resid(t) / sigma2(t)) + prior_mean.row(t).transpose().cwiseQuotient(e.process_var);
  return blk;
}

}  // namespace

GaussianPosterior loadings_posterior(const ModelState& s, int m, const SamplerContext& ctx) {
  const auto& e = s.eq[m];
  return regression_posterior(loadings_design(ctx.design.X, e.factor_fit), tvp_marginal_response(s, m, ctx),
                              tvp_marginal_variance(s, m, ctx), VectorXd::Zero(e.loadings.size()),
                              e.shrink_loadings.prior_variance());
}

GaussianPosterior tvp_posterior(const ModelState& s, int m, Eigen::Index t, const SamplerContext& ctx) {
  const auto& e = s.eq[m];
  const TvpBlock blk = tvp_block(s, m, t, ctx, tvp_marginal_response(s, m, ctx), e.idio_var(), e.tvp_prior_mean());
  const auto llt = factorize(blk.prec, "TVP block");
  return GaussianPosterior{llt.solve(blk.b), llt.solve(MatrixXd::Identity(blk.prec.rows(), blk.prec.cols()))};
}

GaussianPosterior constant_coeff_posterior(const ModelState& s, int m, const SamplerContext& ctx) {
  const auto& e = s.eq[m];
  const VectorXd y = ctx.design.Y.col(m) - tvp_contribution(ctx.design.X, e.beta) - s.q * s.Gamma.row(m).transpose();
  return regression_posterior(ctx.design.X, y, e.idio_var(), VectorXd::Zero(e.a.size()), e.shrink_a.prior_variance());
}

GaussianPosterior gamma_posterior(const ModelState& s, int m, const SamplerContext& ctx) {
  const auto& e = s.eq[m];
  const VectorXd y = response_less_constant(s, m, ctx) - tvp_contribution(ctx.design.X, e.beta);
  return regression_posterior(s.q, y, e.idio_var(), VectorXd::Zero(s.Gamma.cols()), gamma_prior_var(s, m));
}

namespace {

struct FactorBlock {
  MatrixXd prec;
  VectorXd b;
};

FactorBlock factor_block(const ModelState& s, Eigen::Index t, const SamplerContext& ctx, const MatrixXd& idio,
                         const MatrixXd& fvar) {
  const int M = s.n_vars();
  VectorXd resid(M);
  for (int m = 0; m < M; ++m) {
    const auto& e = s.eq[m];
    double fitted = ctx.design.X.row(t).dot(e.a);
    if (e.beta.rows() > t) fitted += ctx.design.X.row(t).dot(e.beta.row(t));
    resid(m) = ctx.design.Y(t, m) - fitted;
  }
  const VectorXd w = idio.row(t).transpose().cwiseInverse();
  FactorBlock blk;
  blk.prec = s.Gamma.transpose() * w.asDiagonal() * s.Gamma;
  blk.prec.diagonal() += fvar.row(t).transpose().cwiseInverse();
  blk.b = s.Gamma.transpose() * w.cwiseProduct(resid);
  return blk;
}

}  // namespace

GaussianPosterior factor_posterior(const ModelState& s, Eigen::Index t, const SamplerContext& ctx) {
  const FactorBlock blk = factor_block(s, t, ctx, s.idio_var(), s.factor_var());
  const auto llt = factorize(blk.prec, "factor block");
  return GaussianPosterior{llt.solve(blk.b), llt.solve(MatrixXd::Identity(blk.prec.rows(), blk.prec.cols()))};
}

MatrixXd tvp_innovations(const ModelState& s, int m) {
  const auto& e = s.eq[m];
  return e.beta - e.tvp_prior_mean();
}

void step1_trees_marginal(ModelState& s, int m, const SamplerContext& ctx, Rng& rng) {
  auto& e = s.eq[m];
  for (int j = 0; j < static_cast<int>(e.tvp_trees.size()); ++j) {
    Ensemble& ens = e.tvp_trees[static_cast<std::size_t>(j)];
    const WeightedTarget target = tvp_tree_target(s, m, j, ctx);
    const bool any_active = std::any_of(target.active.begin(), target.active.end(), [](unsigned char a) { return a != 0; });
    if (any_active) {
      bart_sweep(ens, target, ctx.cuts, rng, &e.moves);
    } else {
      for (Tree& tree : ens.trees) tree = sample_tree_from_prior(ctx.cuts, ens.prior, ens.leaf_prior_var, rng);
    }
    e.factor_fit.col(j) = fit(ens, ctx.design.Z);
  }
}

void step3_loadings(ModelState& s, int m, const SamplerContext& ctx, Rng& rng) {
  auto& e = s.eq[m];
  if (e.loadings.size() == 0) return;
  const VectorXd draw =
      draw_regression(loadings_design(ctx.design.X, e.factor_fit), tvp_marginal_response(s, m, ctx),
                      tvp_marginal_variance(s, m, ctx), VectorXd::Zero(e.loadings.size()),
                      e.shrink_loadings.prior_variance(), rng);
  e.loadings = Eigen::Map<const MatrixXd>(draw.data(), e.loadings.rows(), e.loadings.cols());
}

void step4_tvp(ModelState& s, int m, const SamplerContext& ctx, Rng& rng) {
  auto& e = s.eq[m];
  const VectorXd resid = tvp_marginal_response(s, m, ctx);
  const VectorXd sigma2 = e.idio_var();
  const MatrixXd prior_mean = e.tvp_prior_mean();
  for (Eigen::Index t = 0; t < ctx.n_obs(); ++t) {
    const TvpBlock blk = tvp_block(s, m, t, ctx, resid, sigma2, prior_mean);
    e.beta.row(t) = draw_from_precision(factorize(blk.prec, "TVP block"), blk.b, rng).transpose();
  }
}

void step5_process_vars(ModelState& s, int m, const SamplerContext& ctx, Rng& rng) {
  auto& e = s.eq[m];
  const MatrixXd eta = tvp_innovations(s, m);
  for (Eigen::Index j = 0; j < eta.cols(); ++j)
    e.process_var(j) = std::max(sample_process_variance(eta.col(j), ctx.config.process_var_scale, rng), kMinProcessVar);
}

void step6_constant_coeffs(ModelState& s, int m, const SamplerContext& ctx, Rng& rng) {
  auto& e = s.eq[m];
  const VectorXd y = ctx.design.Y.col(m) - tvp_contribution(ctx.design.X, e.beta) - s.q * s.Gamma.row(m).transpose();
  e.a = draw_regression(ctx.design.X, y, e.idio_var(), VectorXd::Zero(e.a.size()), e.shrink_a.prior_variance(), rng);
}

void step7_gamma(ModelState& s, int m, const SamplerContext& ctx, Rng& rng) {
  auto& e = s.eq[m];
  const VectorXd y = response_less_constant(s, m, ctx) - tvp_contribution(ctx.design.X, e.beta);
  s.Gamma.row(m) =
      draw_regression(s.q, y, e.idio_var(), VectorXd::Zero(s.Gamma.cols()), gamma_prior_var(s, m), rng).transpose();
}

void step8_shrink_constant(ModelState& s, int m, Rng& rng) { sample_horseshoe(s.eq[m].shrink_a, s.eq[m].a, rng); }

void step9_shrink_loadings(ModelState& s, int m, Rng& rng) {
  auto& e = s.eq[m];
  if (e.loadings.size() == 0) return;
  sample_horseshoe(e.shrink_loadings, Eigen::Map<const VectorXd>(e.loadings.data(), e.loadings.size()), rng);
}

void step10_idio_vol(ModelState& s, int m, const SamplerContext& ctx, Rng& rng) {
  auto& e = s.eq[m];
  const VectorXd resid =
      response_less_constant(s, m, ctx) - tvp_contribution(ctx.design.X, e.beta) - s.q * s.Gamma.row(m).transpose();
  sample_idio_sv(resid, e.sv, rng);
}

void step11_factors(ModelState& s, const SamplerContext& ctx, Rng& rng) {
  const MatrixXd idio = s.idio_var();
  const MatrixXd fvar = s.factor_var();
  for (Eigen::Index t = 0; t < ctx.n_obs(); ++t) {
    const FactorBlock blk = factor_block(s, t, ctx, idio, fvar);
    s.q.row(t) = draw_from_precision(factorize(blk.prec, "factor block"), blk.b, rng).transpose();
  }
}

void step_factor_vol(ModelState& s, int factor, const SamplerContext& ctx, Rng& rng) {
  FactorVolState& v = s.vol[static_cast<std::size_t>(factor)];
  heterobart_sweep(v, s.q.col(factor), ctx.cuts, rng, &s.vol_moves);
  s.vol_logvar.col(factor) = fit(v.ensemble, ctx.design.Z);
}

void step12_shrink_gamma(ModelState& s, Rng& rng) {
  sample_horseshoe(s.shrink_gamma, Eigen::Map<const VectorXd>(s.Gamma.data(), s.Gamma.size()), rng);
}

namespace {

ModelState allocate_state(const SamplerContext& ctx) {
  const ModelConfig& c = ctx.config;
  const int M = ctx.n_vars();
  const int K = ctx.n_regressors();
  const Eigen::Index T = ctx.n_obs();
  const int Qb = ctx.has_tvp() ? c.n_tvp_factors : 0;
  const int Qq = c.n_vol_factors;

  ModelState s;
  s.eq.resize(static_cast<std::size_t>(M));
  for (auto& e : s.eq) {
    e.a = VectorXd::Zero(K);
    e.beta = ctx.has_tvp() ? MatrixXd::Zero(T, K) : MatrixXd(0, K);
    e.loadings = MatrixXd::Zero(K, Qb);
    e.process_var = VectorXd::Constant(K, 0.01);
    for (int j = 0; j < Qb; ++j) e.tvp_trees.push_back(Ensemble::make(c.trees_per_tvp_factor, ctx.tvp_prior(j), c.kappa));
    e.factor_fit = MatrixXd::Zero(T, Qb);
    e.shrink_a = make_horseshoe(K);
    e.shrink_loadings = make_column_horseshoe(K, Qb);
  }
  s.Gamma = MatrixXd::Zero(M, Qq);
  s.q = MatrixXd::Zero(T, Qq);
  for (int j = 0; j < Qq; ++j) s.vol.push_back(FactorVolState{Ensemble::make(c.trees_per_vol_factor, ctx.vol_prior(), c.kappa), {}, kLogSquareOffset});
  s.vol_logvar = MatrixXd::Zero(T, Qq);
  s.shrink_gamma = make_column_horseshoe(M, Qq);
  return s;
}

}  // namespace

ModelState initial_state(const SamplerContext& ctx, Rng& rng) {
  ModelState s = allocate_state(ctx);
  const MatrixXd& X = ctx.design.X;
  MatrixXd ridge = X.transpose() * X;
  ridge.diagonal().array() += 1.0;
  const Eigen::LLT<MatrixXd> llt(ridge);
  for (int m = 0; m < ctx.n_vars(); ++m) {
    auto& e = s.eq[m];
    e.a = llt.solve(X.transpose() * ctx.design.Y.col(m));
    e.sv = make_sv_state(ctx.design.Y.col(m) - X * e.a);
    for (Eigen::Index i = 0; i < e.loadings.size(); ++i) e.loadings.data()[i] = rng.normal(0.0, 0.1);
  }
  for (Eigen::Index i = 0; i < s.Gamma.size(); ++i) s.Gamma.data()[i] = rng.normal(0.0, 0.1);
  return s;
}

ModelState draw_from_prior(const SamplerContext& ctx, Rng& rng) {
  ModelState s = allocate_state(ctx);
  const ModelConfig& c = ctx.config;
  const Eigen::Index T = ctx.n_obs();
  const MatrixXd& Z = ctx.design.Z;
  const SvPrior sv_prior;

  for (auto& e : s.eq) {
    draw_horseshoe_prior(e.shrink_a, rng);
    e.a = normal_with_var(clamp_prior_var(e.shrink_a.prior_variance()), rng);
    if (ctx.has_tvp()) {
      for (std::size_t j = 0; j < e.tvp_trees.size(); ++j) {
        Ensemble& ens = e.tvp_trees[j];
        for (Tree& tree : ens.trees) tree = sample_tree_from_prior(ctx.cuts, ens.prior, ens.leaf_prior_var, rng);
        e.factor_fit.col(static_cast<Eigen::Index>(j)) = fit(ens, Z);
      }
      draw_horseshoe_prior(e.shrink_loadings, rng);
      const VectorXd lam = normal_with_var(clamp_prior_var(e.shrink_loadings.prior_variance()), rng);
      e.loadings = Eigen::Map<const MatrixXd>(lam.data(), e.loadings.rows(), e.loadings.cols());
      for (Eigen::Index j = 0; j < e.process_var.size(); ++j)
        e.process_var(j) = std::max(rng.gamma(0.5, 1.0 / (4.0 * c.process_var_scale)), kMinProcessVar);
      const MatrixXd mean = e.tvp_prior_mean();
      for (Eigen::Index t = 0; t < T; ++t)
        for (Eigen::Index j = 0; j < e.beta.cols(); ++j)
          e.beta(t, j) = mean(t, j) + rng.normal(0.0, std::sqrt(e.process_var(j)));
    }
    SvState& sv = e.sv;
    sv.mu = rng.normal(sv_prior.mu_mean, std::sqrt(sv_prior.mu_var));
    sv.phi = 2.0 * rng.beta(sv_prior.phi_a, sv_prior.phi_b) - 1.0;
    sv.sigma2 = std::max(rng.gamma(sv_prior.sigma2_shape, sv_prior.sigma2_rate), 1e-300);
    sv.h.resize(T);
    sv.h(0) = rng.normal(sv.mu, std::sqrt(sv.sigma2 / (1.0 - sv.phi * sv.phi)));
    for (Eigen::Index t = 1; t < T; ++t) sv.h(t) = sv.mu + sv.phi * (sv.h(t - 1) - sv.mu) + rng.normal(0.0, std::sqrt(sv.sigma2));
    sv.indicators.assign(static_cast<std::size_t>(T), 4);
  }

  draw_horseshoe_prior(s.shrink_gamma, rng);
  const VectorXd g = normal_with_var(clamp_prior_var(s.shrink_gamma.prior_variance()), rng);
  s.Gamma = Eigen::Map<const MatrixXd>(g.data(), s.Gamma.rows(), s.Gamma.cols());
  for (std::size_t j = 0; j < s.vol.size(); ++j) {
    Ensemble& ens = s.vol[j].ensemble;
    for (Tree& tree : ens.trees) tree = sample_tree_from_prior(ctx.cuts, ens.prior, ens.leaf_prior_var, rng);
    s.vol_logvar.col(static_cast<Eigen::Index>(j)) = fit(ens, Z);
  }
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index j = 0; j < s.q.cols(); ++j) s.q(t, j) = rng.normal(0.0, std::exp(0.5 * s.vol_logvar(t, j)));
  return s;
}

MatrixXd simulate_response(const ModelState& s, const SamplerContext& ctx, Rng& rng) {
  const MatrixXd& X = ctx.design.X;
  MatrixXd Y(ctx.n_obs(), ctx.n_vars());
  for (int m = 0; m < ctx.n_vars(); ++m) {
    const auto& e = s.eq[m];
    VectorXd mean = X * e.a + s.q * s.Gamma.row(m).transpose();
    if (e.beta.rows() == X.rows()) mean += tvp_contribution(X, e.beta);
    for (Eigen::Index t = 0; t < X.rows(); ++t) Y(t, m) = mean(t) + rng.normal(0.0, std::exp(0.5 * e.sv.h(t)));
  }
  return Y;
}

namespace {

void check_finite(const EquationState& e, int m) {
  if (!e.a.allFinite() || !e.sv.h.allFinite() || !e.beta.allFinite() || !e.loadings.allFinite())
    throw NumericalError("non-finite parameters in equation " + std::to_string(m));
}

void equation_sweep(ModelState& s, int m, const SamplerContext& ctx, std::int64_t sweep, const RunOptions& opts,
                    Rng& rng) {
  auto traced = [&](Step step, auto&& fn) {
    try {
      fn();
    } catch (const Error& err) {
      throw NumericalError("step " + std::to_string(static_cast<int>(step)) + ", equation " + std::to_string(m) +
                           ": " + err.what());
    }
    if (opts.trace) opts.trace(sweep, m, step);
  };
  const bool tvp = ctx.has_tvp();
  const bool factors = tvp && !s.eq[m].tvp_trees.empty();
  if (factors) {
    traced(Step::Trees, [&] { step1_trees_marginal(s, m, ctx, rng); });
    traced(Step::Loadings, [&] { step3_loadings(s, m, ctx, rng); });
  }
  if (tvp) {
    traced(Step::Tvp, [&] { step4_tvp(s, m, ctx, rng); });
    traced(Step::ProcessVar, [&] { step5_process_vars(s, m, ctx, rng); });
  }
  traced(Step::Constant, [&] { step6_constant_coeffs(s, m, ctx, rng); });
  traced(Step::Gamma, [&] { step7_gamma(s, m, ctx, rng); });
  traced(Step::ShrinkConstant, [&] { step8_shrink_constant(s, m, rng); });
  if (factors) traced(Step::ShrinkLoadings, [&] { step9_shrink_loadings(s, m, rng); });
  traced(Step::IdioVol, [&] { step10_idio_vol(s, m, ctx, rng); });
  check_finite(s.eq[m], m);
}

}  // namespace

void gibbs_sweep(ModelState& s, const SamplerContext& ctx, std::int64_t sweep, const RunOptions& opts) {
  const std::uint64_t seed = ctx.config.seed;
  const auto sw = static_cast<std::uint64_t>(sweep);
  const int M = ctx.n_vars();
  auto run_equation = [&](int m) {
    Rng rng = Rng::substream(seed, Stream::Equation, static_cast<std::uint64_t>(m), sw);
    equation_sweep(s, m, ctx, sweep, opts, rng);
  };

  const int workers = std::clamp(opts.threads, 1, M);
  if (workers == 1) {
    for (int m = 0; m < M; ++m) run_equation(m);
  } else {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (int m = w; m < M; m += workers) run_equation(m);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& err : errors)
      if (err) std::rethrow_exception(err);
  }

  {
    Rng rng = Rng::substream(seed, Stream::Factors, 0, sw);
    step11_factors(s, ctx, rng);
    if (opts.trace) opts.trace(sweep, -1, Step::Factors);
  }
  for (int j = 0; j < static_cast<int>(s.vol.size()); ++j) {
    Rng rng = Rng::substream(seed, Stream::FactorVolatility, static_cast<std::uint64_t>(j), sw);
    step_factor_vol(s, j, ctx, rng);
  }
  if (opts.trace) opts.trace(sweep, -1, Step::FactorVol);
  {
    Rng rng = Rng::substream(seed, Stream::LoadingShrinkage, 0, sw);
    step12_shrink_gamma(s, rng);
    if (opts.trace) opts.trace(sweep, -1, Step::ShrinkGamma);
  }
  if (!s.q.allFinite() || !s.Gamma.allFinite() || !s.vol_logvar.allFinite())
    throw NumericalError("non-finite factors or loadings");
}

MatrixXd DrawRecord::coefficients_at(Eigen::Index t) const {
  MatrixXd out = A;
  if (has_tvp())
    for (std::size_t m = 0; m < beta.size(); ++m) out.row(static_cast<Eigen::Index>(m)) += beta[m].row(t);
  return out;
}

DrawRecord snapshot(const ModelState& s, const SamplerContext& ctx, bool store_tvp) {
  DrawRecord d;
  d.A = s.A();
  d.Gamma = s.Gamma;
  d.q = s.q;
  d.R = s.factor_var();
  d.Sigma = s.idio_var();
  for (const auto& e : s.eq) {
    if (store_tvp && ctx.has_tvp()) d.beta.push_back(e.beta);
    d.loadings.push_back(e.loadings);
    d.process_var.push_back(e.process_var);
    d.tvp_trees.push_back(e.tvp_trees);
  }
  // The likelihood always uses the full paths, stored or not.
  DrawRecord full = d;
  if (ctx.has_tvp() && !(store_tvp)) {
    for (const auto& e : s.eq) full.beta.push_back(e.beta);
  }
  d.loglik = pointwise_loglik(full, ctx.design);
  return d;
}

VectorXd pointwise_loglik(const DrawRecord& d, const DesignData& design, const std::vector<int>& subset) {
  const int M = static_cast<int>(design.n_vars());
  std::vector<int> idx = subset;
  if (idx.empty())
    for (int m = 0; m < M; ++m) idx.push_back(m);
  for (int i : idx)
    if (i < 0 || i >= M) throw DimensionError("variable subset index out of range");
  const auto n = static_cast<Eigen::Index>(idx.size());
  const Eigen::Index T = design.n_obs();
  const double log2pi = std::log(2.0 * std::numbers::pi);

  MatrixXd G(n, d.Gamma.cols());
  for (Eigen::Index i = 0; i < n; ++i) G.row(i) = d.Gamma.row(idx[static_cast<std::size_t>(i)]);
  VectorXd out(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    const MatrixXd C = d.coefficients_at(t);
    VectorXd e(n);
    MatrixXd omega = G * d.R.row(t).asDiagonal() * G.transpose();
    for (Eigen::Index i = 0; i < n; ++i) {
      const int m = idx[static_cast<std::size_t>(i)];
      e(i) = design.Y(t, m) - C.row(m).dot(design.X.row(t));
      omega(i, i) += d.Sigma(t, m);
    }
    const Eigen::LLT<MatrixXd> llt(omega);
    if (llt.info() != Eigen::Success) throw NumericalError("error covariance not positive definite");
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const VectorXd u = llt.matrixL().solve(e);
    out(t) = -0.5 * (static_cast<double>(n) * log2pi + logdet + u.squaredNorm());
  }
  return out;
}

MatrixXd PosteriorDraws::loglik() const {
  const Eigen::Index T = design.n_obs();
  MatrixXd out(static_cast<Eigen::Index>(draws.size()), T);
  for (std::size_t s = 0; s < draws.size(); ++s) out.row(static_cast<Eigen::Index>(s)) = draws[s].loglik.transpose();
  return out;
}

double PosteriorDraws::log_jacobian(const std::vector<int>& subset) const {
  double total = 0.0;
  if (subset.empty()) {
    for (const auto& sc : scalers) total += std::log(sc.unit());
  } else {
    for (int m : subset) total += std::log(scalers.at(static_cast<std::size_t>(m)).unit());
  }
  return total;
}

MatrixXd PosteriorDraws::loglik_subset(const std::vector<int>& subset) const {
  if (subset.empty()) return loglik();
  const DesignData scaled = scale_design(design, scalers);
  MatrixXd out(static_cast<Eigen::Index>(draws.size()), design.n_obs());
  const double jac = log_jacobian(subset);
  for (std::size_t s = 0; s < draws.size(); ++s) {
    if (!config.constant_coefficients && !draws[s].has_tvp())
      throw Error("variable-subset log-likelihood needs stored TVP paths (store_tvp)");
    out.row(static_cast<Eigen::Index>(s)) = (pointwise_loglik(draws[s], scaled, subset).array() - jac).transpose();
  }
  return out;
}

PosteriorDraws run_mcmc(const ModelConfig& config, const DesignData& design, const RunOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  const ModelConfig cfg = validate_config(config);
  PosteriorDraws out;
  out.config = cfg;
  out.design = design;
  out.scalers = fit_scalers(design.Y, cfg.scale_response, design.layout.intercept);

  const SamplerContext ctx(scale_design(design, out.scalers), cfg);
  Rng init = Rng::substream(cfg.seed, Stream::Init, 0);
  ModelState state = initial_state(ctx, init);
  const double jac = out.log_jacobian();
  const int keep = cfg.retained_draws();
  out.draws.reserve(static_cast<std::size_t>(keep));

  for (int sweep = 0; sweep < cfg.n_draws; ++sweep) {
    try {
      gibbs_sweep(state, ctx, sweep, opts);
    } catch (const Error& err) {
      throw NumericalError("sweep " + std::to_string(sweep) + ": " + err.what());
    }
    if (sweep >= cfg.n_burn && (sweep - cfg.n_burn) % cfg.thin == 0 && static_cast<int>(out.draws.size()) < keep) {
      DrawRecord d = snapshot(state, ctx, cfg.store_tvp);
      d.sweep = sweep;
      d.loglik.array() -= jac;
      out.draws.push_back(std::move(d));
    }
    if (opts.progress) opts.progress(sweep + 1, cfg.n_draws);
  }
  for (const auto& e : state.eq) out.tvp_moves.push_back(e.moves);
  out.vol_moves = state.vol_moves;
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

PosteriorDraws run_mcmc(const ModelConfig& config, const Dataset& dataset, const RunOptions& opts) {
  return run_mcmc(config, build_design(dataset, config.lags, config.include_intercept), opts);
}

}  // namespace tvpbart
