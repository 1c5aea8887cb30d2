#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"
#include "tvpbart/hetero_vol.hpp"

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include <cmath>
#include <numbers>

using namespace tvpbart;

namespace {

// Dense posterior of h given indicators: AR(1) prior precision (tridiagonal)
// plus the diagonal observation precision.
void dense_sv_posterior(const VectorXd& ystar, const SvState& s, const MixtureTable& tab, VectorXd& mean,
                        MatrixXd& cov) {
  const Eigen::Index T = ystar.size();
  MatrixXd P = MatrixXd::Zero(T, T);
  for (Eigen::Index t = 0; t < T; ++t) {
    P(t, t) = (t == 0 || t == T - 1) ? 1.0 : 1.0 + s.phi * s.phi;
    if (t + 1 < T) P(t, t + 1) = P(t + 1, t) = -s.phi;
  }
  P /= s.sigma2;
  VectorXd b(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    const int c = s.indicators[static_cast<std::size_t>(t)];
    P(t, t) += 1.0 / tab.variance[c];
    b(t) = (ystar(t) - tab.mean[c] - s.mu) / tab.variance[c];
  }
  cov = P.inverse();
  mean = (cov * b).array() + s.mu;
}

SvState example_state(Eigen::Index T, Rng& rng) {
  SvState s;
  s.mu = -0.7;
  s.phi = 0.85;
  s.sigma2 = 0.2;
  s.h = VectorXd::Zero(T);
  for (Eigen::Index t = 0; t < T; ++t) s.indicators.push_back(rng.uniform_int(10));
  return s;
}

}  // namespace

TEST_CASE("mixture table reproduces the log chi-square(1) moments") {
  const MixtureTable& tab = MixtureTable::omori();
  double wsum = 0.0;
  for (double w : tab.weight) wsum += w;
  CHECK(wsum == doctest::Approx(1.0).epsilon(1e-4));
  // E log chi2_1 = digamma(1/2) + log 2, Var = trigamma(1/2) = pi^2 / 2.
  const double mean = boost::math::digamma(0.5) + std::log(2.0);
  const double var = boost::math::trigamma(0.5);
  CHECK(std::abs(tab.mixture_mean() - mean) < 0.05);
  CHECK(std::abs(tab.mixture_variance() - var) < 0.1);
  CHECK(std::abs(tab.mixture_mean() - -1.2704) < 0.05);
  CHECK(std::abs(tab.mixture_variance() - 4.9348) < 0.1);
}

TEST_CASE("indicator frequencies match the component posterior") {
  const MixtureTable& tab = MixtureTable::omori();
  VectorXd resid = VectorXd::Constant(1, -1.8), fit = VectorXd::Constant(1, 0.4);
  std::vector<double> p(10);
  double total = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double d = resid(0) - fit(0) - tab.mean[i];
    p[i] = tab.weight[i] * std::exp(-0.5 * d * d / tab.variance[i]) / std::sqrt(2.0 * std::numbers::pi * tab.variance[i]);
    total += p[i];
  }
  Rng rng(1);
  const int n = 100000;
  std::vector<int> counts(10, 0);
  for (int k = 0; k < n; ++k) ++counts[sample_mixture_indicators(resid, fit, tab, rng)[0]];
  for (int i = 0; i < 10; ++i) {
    const double pi = p[i] / total;
    const double se = std::sqrt(pi * (1 - pi) / n);
    if (se > 0) CHECK(std::abs(counts[i] / static_cast<double>(n) - pi) < 4.0 * se + 1e-12);
  }
}

TEST_CASE("smoothed path equals the dense Gaussian posterior mean") {
  Rng rng(2);
  const int T = 30;
  SvState s = example_state(T, rng);
  VectorXd ystar(T);
  for (int t = 0; t < T; ++t) ystar(t) = rng.normal(-1.5, 2.0);
  VectorXd mean;
  MatrixXd cov;
  dense_sv_posterior(ystar, s, MixtureTable::omori(), mean, cov);
  CHECK((sv_smoothed_path(ystar, s, MixtureTable::omori()) - mean).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("forward filtering backward sampling draws from the dense posterior") {
  Rng rng(3);
  const int T = 25;
  SvState s = example_state(T, rng);
  VectorXd ystar(T);
  for (int t = 0; t < T; ++t) ystar(t) = rng.normal(-1.5, 2.0);
  VectorXd mean;
  MatrixXd cov;
  dense_sv_posterior(ystar, s, MixtureTable::omori(), mean, cov);
  const int n = 40000;
  MatrixXd draws(n, T);
  for (int k = 0; k < n; ++k) {
    sv_sample_path(ystar, s, MixtureTable::omori(), rng);
    draws.row(k) = s.h.transpose();
  }
  const MatrixXd sc = testing::sample_cov(draws);
  const VectorXd smean = draws.colwise().mean().transpose();
  for (int t = 0; t < T; ++t) {
    CHECK(std::abs(smean(t) - mean(t)) < 4.5 * std::sqrt(cov(t, t) / n));
    CHECK(std::abs(sc(t, t) - cov(t, t)) < 4.5 * cov(t, t) * std::sqrt(2.0 / n));
  }
  // Lag-one covariance, the term backward sampling gets wrong most easily.
  for (int t = 0; t + 1 < T; ++t) {
    const double se = std::sqrt((cov(t, t) * cov(t + 1, t + 1) + cov(t, t + 1) * cov(t, t + 1)) / n);
    CHECK(std::abs(sc(t, t + 1) - cov(t, t + 1)) < 4.5 * se);
  }
}

TEST_CASE("SV level draw matches its Gaussian conditional") {
  Rng rng(4);
  SvState s;
  s.phi = 0.9;
  s.sigma2 = 0.05;
  s.h.resize(50);
  for (int t = 0; t < 50; ++t) s.h(t) = -1.0 + 0.3 * std::sin(0.4 * t);
  // x_1 = h_1 - mu has variance sigma2 / (1 - phi^2); h_t - phi h_{t-1} = (1 - phi) mu + e_t.
  const SvPrior prior;
  double prec = 1.0 / prior.mu_var + (1 - s.phi * s.phi) / s.sigma2;
  double b = s.h(0) * (1 - s.phi * s.phi) / s.sigma2;
  for (int t = 1; t < 50; ++t) {
    prec += std::pow(1 - s.phi, 2) / s.sigma2;
    b += (1 - s.phi) * (s.h(t) - s.phi * s.h(t - 1)) / s.sigma2;
  }
  std::vector<double> x(50000);
  for (auto& v : x) {
    sv_sample_mu(s, prior, rng);
    v = s.mu;
  }
  CHECK(std::abs(testing::mean_z(x, b / prec)) < 4.0);
  CHECK(std::abs(testing::var_z(x, 1.0 / prec)) < 4.0);
}

TEST_CASE("SV innovation variance draw matches its GIG conditional") {
  Rng rng(5);
  SvState s;
  s.mu = -1.0;
  s.phi = 0.8;
  s.h.resize(40);
  for (int t = 0; t < 40; ++t) s.h(t) = -1.0 + 0.5 * std::cos(0.3 * t);
  double ss = std::pow(s.h(0) - s.mu, 2) * (1 - s.phi * s.phi);
  for (int t = 1; t < 40; ++t) ss += std::pow(s.h(t) - s.mu - s.phi * (s.h(t - 1) - s.mu), 2);
  const SvPrior prior;
  // Gamma(a, rate b) prior: posterior GIG(a - T/2, ss, 2b).
  const double lambda = prior.sigma2_shape - 20.0, chi = ss, psi = 2.0 * prior.sigma2_rate;
  const double omega = std::sqrt(chi * psi);
  const double m1 = std::sqrt(chi / psi) * boost::math::cyl_bessel_k(lambda + 1, omega) / boost::math::cyl_bessel_k(lambda, omega);
  std::vector<double> x(50000);
  for (auto& v : x) {
    sv_sample_sigma2(s, prior, rng);
    v = s.sigma2;
  }
  CHECK(std::abs(testing::mean_z(x, m1)) < 4.0);
}

TEST_CASE("SV persistence step leaves its conditional invariant") {
  Rng rng(6);
  SvState s;
  s.mu = 0.0;
  s.sigma2 = 0.1;
  s.h.resize(60);
  s.h(0) = 0.3;
  for (int t = 1; t < 60; ++t) s.h(t) = 0.9 * s.h(t - 1) + rng.normal(0.0, std::sqrt(0.1));
  const SvPrior prior;
  // Posterior on a grid: Beta prior on (phi + 1)/2 times the path density.
  auto log_post = [&](double phi) {
    double lp = (prior.phi_a - 1) * std::log((1 + phi) / 2) + (prior.phi_b - 1) * std::log((1 - phi) / 2);
    lp += 0.5 * std::log(1 - phi * phi) - s.h(0) * s.h(0) * (1 - phi * phi) / (2 * s.sigma2);
    for (int t = 1; t < 60; ++t) lp -= std::pow(s.h(t) - phi * s.h(t - 1), 2) / (2 * s.sigma2);
    return lp;
  };
  const int G = 20000;
  double top = -1e300;
  std::vector<double> lp(G);
  for (int g = 0; g < G; ++g) top = std::max(top, lp[g] = log_post(-1 + (g + 0.5) * 2.0 / G));
  double z = 0, m = 0;
  for (int g = 0; g < G; ++g) {
    const double w = std::exp(lp[g] - top);
    z += w;
    m += w * (-1 + (g + 0.5) * 2.0 / G);
  }
  const double post_mean = m / z;

  const int n = 200000, batches = 50;
  std::vector<double> bm(batches, 0.0);
  s.phi = 0.5;
  for (int i = 0; i < n; ++i) {
    sv_sample_phi(s, prior, rng);
    bm[i / (n / batches)] += s.phi / (n / batches);
  }
  const auto mm = testing::moments(bm);
  CHECK(std::abs(mm.mean - post_mean) < 4.0 * std::sqrt(mm.var / batches));
}

TEST_CASE("SV sampler recovers simulated parameters") {
  Rng rng(7);
  const int T = 2000;
  const double mu = -1.0, phi = 0.95, sigma2 = 0.04;
  VectorXd h(T), resid(T);
  h(0) = mu + rng.normal(0.0, std::sqrt(sigma2 / (1 - phi * phi)));
  for (int t = 1; t < T; ++t) h(t) = mu + phi * (h(t - 1) - mu) + rng.normal(0.0, std::sqrt(sigma2));
  for (int t = 0; t < T; ++t) resid(t) = std::exp(0.5 * h(t)) * rng.normal();
  SvState s = make_sv_state(resid);
  std::vector<double> mus, phis, sigmas;
  for (int it = 0; it < 4000; ++it) {
    sample_idio_sv(resid, s, rng);
    if (it >= 1000) {
      mus.push_back(s.mu);
      phis.push_back(s.phi);
      sigmas.push_back(s.sigma2);
    }
  }
  auto within = [](const std::vector<double>& x, double truth) {
    const auto m = testing::moments(x);
    return std::abs(m.mean - truth) < 3.0 * std::sqrt(m.var);
  };
  CHECK(within(mus, mu));
  CHECK(within(phis, phi));
  CHECK(within(sigmas, sigma2));
}

TEST_CASE("heteroBART recovers a constant log-variance") {
  Rng rng(8);
  const int T = 1000;
  MatrixXd Z = VectorXd::LinSpaced(T, 0.0, 1.0);
  VectorXd q(T);
  for (int t = 0; t < T; ++t) q(t) = std::exp(1.0) * rng.normal();  // variance e^2
  const CutTable cuts(Z);
  FactorVolState st{Ensemble::make(20, TreePrior{0.95, 2.0, 1, 5}, 2.0), {}, kLogSquareOffset};
  double mean = 0.0;
  int kept = 0;
  for (int s = 0; s < 2000; ++s) {
    heterobart_sweep(st, q, cuts, rng);
    if (s >= 500) {
      mean += fit(st.ensemble, Z).mean();
      ++kept;
    }
  }
  CHECK(std::abs(mean / kept - 2.0) < 0.2);
}

TEST_CASE("heteroBART separates two variance regimes") {
  Rng rng(9);
  const int T = 1000;
  MatrixXd Z(T, 1);
  VectorXd q(T);
  for (int t = 0; t < T; ++t) {
    Z(t, 0) = (t / 50) % 2;
    q(t) = (Z(t, 0) > 0.5 ? 3.0 : 1.0) * rng.normal();
  }
  const CutTable cuts(Z);
  FactorVolState st{Ensemble::make(20, TreePrior{0.95, 2.0, 1, 5}, 2.0), {}, kLogSquareOffset};
  VectorXd acc = VectorXd::Zero(T);
  int kept = 0;
  for (int s = 0; s < 2000; ++s) {
    heterobart_sweep(st, q, cuts, rng);
    if (s >= 500) {
      acc += factor_variances(st, Z);
      ++kept;
    }
  }
  acc /= kept;
  double lo = 0, hi = 0;
  int nlo = 0, nhi = 0;
  for (int t = 0; t < T; ++t) {
    if (Z(t, 0) > 0.5) {
      hi += acc(t);
      ++nhi;
    } else {
      lo += acc(t);
      ++nlo;
    }
  }
  CHECK(std::abs(lo / nlo - 1.0) < 0.3);
  CHECK(std::abs(hi / nhi - 9.0) < 0.3 * 9.0);
}
