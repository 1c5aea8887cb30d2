#include "tvpbart/hetero_vol.hpp"

#include "tvpbart/shrinkage.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace tvpbart {

const MixtureTable& MixtureTable::omori() {
  static const MixtureTable table{
      {0.00609, 0.04775, 0.13057, 0.20674, 0.22715, 0.18842, 0.12047, 0.05591, 0.01575, 0.00115},
      {1.92677, 1.34744, 0.73504, 0.02266, -0.85173, -1.97278, -3.46788, -5.55246, -8.68384, -14.65000},
      {0.11265, 0.17788, 0.26768, 0.40611, 0.62699, 0.98583, 1.57469, 2.54498, 4.16591, 7.33342}};
  return table;
}

double MixtureTable::mixture_mean() const {
  double m = 0.0;
  for (int i = 0; i < size(); ++i) m += weight[i] * mean[i];
  return m;
}

double MixtureTable::mixture_variance() const {
  const double mu = mixture_mean();
  double v = 0.0;
  for (int i = 0; i < size(); ++i) v += weight[i] * (variance[i] + (mean[i] - mu) * (mean[i] - mu));
  return v;
}

std::vector<int> sample_mixture_indicators(const Eigen::Ref<const VectorXd>& resid, const Eigen::Ref<const VectorXd>& fit,
                                           const MixtureTable& table, Rng& rng) {
  if (resid.size() != fit.size()) throw DimensionError("residual and fit lengths differ");
  const int k = table.size();
  std::vector<double> log_base(static_cast<std::size_t>(k)), logp(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) log_base[i] = std::log(table.weight[i]) - 0.5 * std::log(table.variance[i]);

  std::vector<int> out(static_cast<std::size_t>(resid.size()));
  for (Eigen::Index t = 0; t < resid.size(); ++t) {
    const double e = resid(t) - fit(t);
    double top = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < k; ++i) {
      const double d = e - table.mean[i];
      logp[i] = log_base[i] - 0.5 * d * d / table.variance[i];
      top = std::max(top, logp[i]);
    }
    double total = 0.0;
    for (int i = 0; i < k; ++i) total += (logp[i] = std::exp(logp[i] - top));
    double u = rng.uniform() * total;
    int pick = k - 1;
    for (int i = 0; i < k; ++i) {
      if (u < logp[i]) {
        pick = i;
        break;
      }
      u -= logp[i];
    }
    out[static_cast<std::size_t>(t)] = pick;
  }
  return out;
}

VectorXd factor_variances(const FactorVolState& state, const MatrixXd& Z) {
  return fit(state.ensemble, Z).array().exp().matrix();
}

void heterobart_sweep(FactorVolState& state, const Eigen::Ref<const VectorXd>& q, const CutTable& cuts, Rng& rng,
                      MoveCounts* counts, const MixtureTable& table) {
  const Eigen::Index T = q.size();
  if (T != cuts.n_obs()) throw DimensionError("factor path and modifiers differ in length");
  VectorXd ystar(T);
  for (Eigen::Index t = 0; t < T; ++t) ystar(t) = linearize(q(t), state.offset);

  state.indicators = sample_mixture_indicators(ystar, fit(state.ensemble, cuts.Z()), table, rng);
  WeightedTarget target{VectorXd(T), VectorXd(T), {}};
  for (Eigen::Index t = 0; t < T; ++t) {
    const int s = state.indicators[static_cast<std::size_t>(t)];
    target.response(t) = ystar(t) - table.mean[s];
    target.variance(t) = table.variance[s];
  }
  bart_sweep(state.ensemble, target, cuts, rng, counts);
}

SvState make_sv_state(const Eigen::Ref<const VectorXd>& resid) {
  SvState s;
  const double var = std::max(resid.squaredNorm() / std::max<Eigen::Index>(resid.size(), 1), 1e-8);
  s.mu = std::log(var);
  s.h = VectorXd::Constant(resid.size(), s.mu);
  s.indicators.assign(static_cast<std::size_t>(resid.size()), 4);
  return s;
}

void sv_sample_indicators(const Eigen::Ref<const VectorXd>& ystar, SvState& state, const MixtureTable& table, Rng& rng) {
  state.indicators = sample_mixture_indicators(ystar, state.h, table, rng);
}

namespace {

struct FilterOutput {
  VectorXd mean;  // filtered means
  VectorXd var;   // filtered variances
};

FilterOutput sv_filter(const Eigen::Ref<const VectorXd>& ystar, const SvState& s, const MixtureTable& table) {
  const Eigen::Index T = ystar.size();
  FilterOutput f{VectorXd(T), VectorXd(T)};
  double a = s.mu;
  double p = s.sigma2 / (1.0 - s.phi * s.phi);
  for (Eigen::Index t = 0; t < T; ++t) {
    const int c = s.indicators[static_cast<std::size_t>(t)];
    const double gain = p / (p + table.variance[c]);
    f.mean(t) = a + gain * (ystar(t) - table.mean[c] - a);
    f.var(t) = p * (1.0 - gain);
    a = s.mu + s.phi * (f.mean(t) - s.mu);
    p = s.phi * s.phi * f.var(t) + s.sigma2;
  }
  return f;
}

}  // namespace

void sv_sample_path(const Eigen::Ref<const VectorXd>& ystar, SvState& s, const MixtureTable& table, Rng& rng) {
  const Eigen::Index T = ystar.size();
  if (static_cast<Eigen::Index>(s.indicators.size()) != T) throw DimensionError("indicator count differs from T");
  const FilterOutput f = sv_filter(ystar, s, table);
  s.h.resize(T);
  s.h(T - 1) = rng.normal(f.mean(T - 1), std::sqrt(f.var(T - 1)));
  for (Eigen::Index t = T - 2; t >= 0; --t) {
    const double pred = s.phi * s.phi * f.var(t) + s.sigma2;
    const double gain = f.var(t) * s.phi / pred;
    const double mean = f.mean(t) + gain * (s.h(t + 1) - s.mu - s.phi * (f.mean(t) - s.mu));
    const double var = f.var(t) * s.sigma2 / pred;
    s.h(t) = rng.normal(mean, std::sqrt(var));
  }
}

VectorXd sv_smoothed_path(const Eigen::Ref<const VectorXd>& ystar, const SvState& s, const MixtureTable& table) {
  const Eigen::Index T = ystar.size();
  const FilterOutput f = sv_filter(ystar, s, table);
  VectorXd sm(T);
  sm(T - 1) = f.mean(T - 1);
  for (Eigen::Index t = T - 2; t >= 0; --t) {
    const double pred = s.phi * s.phi * f.var(t) + s.sigma2;
    const double gain = f.var(t) * s.phi / pred;
    sm(t) = f.mean(t) + gain * (sm(t + 1) - s.mu - s.phi * (f.mean(t) - s.mu));
  }
  return sm;
}

void sv_sample_mu(SvState& s, const SvPrior& prior, Rng& rng) {
  const Eigen::Index T = s.h.size();
  const double one_minus_phi = 1.0 - s.phi;
  double prec = 1.0 / prior.mu_var + (1.0 - s.phi * s.phi) / s.sigma2;
  double b = prior.mu_mean / prior.mu_var + s.h(0) * (1.0 - s.phi * s.phi) / s.sigma2;
  for (Eigen::Index t = 1; t < T; ++t) {
    prec += one_minus_phi * one_minus_phi / s.sigma2;
    b += one_minus_phi * (s.h(t) - s.phi * s.h(t - 1)) / s.sigma2;
  }
  s.mu = rng.normal(b / prec, std::sqrt(1.0 / prec));
}

void sv_sample_phi(SvState& s, const SvPrior& prior, Rng& rng) {
  const Eigen::Index T = s.h.size();
  if (T < 2) return;
  const VectorXd x = s.h.array() - s.mu;
  const double sxx = x.head(T - 1).squaredNorm();
  if (!(sxx > 0.0)) return;
  const double sxy = x.head(T - 1).dot(x.tail(T - 1));
  const double proposal = rng.normal(sxy / sxx, std::sqrt(s.sigma2 / sxx));
  if (!(std::abs(proposal) < 1.0)) return;

  // The proposal matches the transition likelihood, so only the initial-state
  // density and the prior enter the ratio.
  auto log_rest = [&](double phi) {
    return 0.5 * std::log(1.0 - phi * phi) - x(0) * x(0) * (1.0 - phi * phi) / (2.0 * s.sigma2) +
           (prior.phi_a - 1.0) * std::log((1.0 + phi) / 2.0) + (prior.phi_b - 1.0) * std::log((1.0 - phi) / 2.0);
  };
  if (std::log(rng.uniform_pos()) < log_rest(proposal) - log_rest(s.phi)) s.phi = proposal;
}

void sv_sample_sigma2(SvState& s, const SvPrior& prior, Rng& rng) {
  const Eigen::Index T = s.h.size();
  const VectorXd x = s.h.array() - s.mu;
  double ss = x(0) * x(0) * (1.0 - s.phi * s.phi);
  for (Eigen::Index t = 1; t < T; ++t) {
    const double e = x(t) - s.phi * x(t - 1);
    ss += e * e;
  }
  // Gamma(a, rate b) prior times the Gaussian path likelihood.
  s.sigma2 = sample_gig(prior.sigma2_shape - static_cast<double>(T) / 2.0, ss, 2.0 * prior.sigma2_rate, rng);
}

void sample_idio_sv(const Eigen::Ref<const VectorXd>& resid, SvState& s, Rng& rng, const SvPrior& prior,
                    const MixtureTable& table) {
  const Eigen::Index T = resid.size();
  if (s.h.size() != T) throw DimensionError("SV state length differs from the residuals");
  if (!(std::abs(s.phi) < 1.0) || !(s.sigma2 > 0.0)) throw ParameterError("SV state needs |phi| < 1 and sigma2 > 0");
  VectorXd ystar(T);
  for (Eigen::Index t = 0; t < T; ++t) ystar(t) = linearize(resid(t), s.offset);
  sv_sample_indicators(ystar, s, table, rng);
  sv_sample_path(ystar, s, table, rng);
  sv_sample_mu(s, prior, rng);
  sv_sample_phi(s, prior, rng);
  sv_sample_sigma2(s, prior, rng);
}

}  // namespace tvpbart
