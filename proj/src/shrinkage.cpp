#include "tvpbart/shrinkage.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numbers>

namespace tvpbart {

namespace {

double clamp_positive(double x) { return std::clamp(x, DBL_MIN, DBL_MAX); }

// Inverse gamma with shape 1: scale / Exp(1).
double inv_gamma1(double scale, Rng& rng) { return clamp_positive(rng.inv_gamma(1.0, scale)); }

double gig_mode(double lambda, double omega) {
  if (lambda >= 1.0) return (std::sqrt((lambda - 1.0) * (lambda - 1.0) + omega * omega) + (lambda - 1.0)) / omega;
  return omega / (std::sqrt((1.0 - lambda) * (1.0 - lambda) + omega * omega) + (1.0 - lambda));
}

// The three samplers below draw from x^{lambda-1} exp(-omega/2 (x + 1/x))
// with lambda >= 0.

// Ratio of uniforms around the mode; the bounding rectangle comes from the
// roots of a cubic.
double gig_rou_shift(double lambda, double omega, Rng& rng) {
  const double t = 0.5 * (lambda - 1.0);
  const double s = 0.25 * omega;
  const double xm = gig_mode(lambda, omega);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);

  const double a = -(2.0 * (lambda + 1.0) / omega + xm);
  const double b = 2.0 * (lambda - 1.0) * xm / omega - 1.0;
  const double c = xm;
  const double p = b - a * a / 3.0;
  const double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
  const double fi = std::acos(std::clamp(-q / (2.0 * std::sqrt(-p * p * p / 27.0)), -1.0, 1.0));
  const double fak = 2.0 * std::sqrt(-p / 3.0);
  const double y1 = fak * std::cos(fi / 3.0) - a / 3.0;
  const double y2 = fak * std::cos(fi / 3.0 + 4.0 / 3.0 * std::numbers::pi) - a / 3.0;
  const double uplus = (y1 - xm) * std::exp(t * std::log(y1) - s * (y1 + 1.0 / y1) - nc);
  const double uminus = (y2 - xm) * std::exp(t * std::log(y2) - s * (y2 + 1.0 / y2) - nc);

  for (;;) {
    const double u = uminus + rng.uniform() * (uplus - uminus);
    const double v = rng.uniform_pos();
    const double x = u / v + xm;
    if (x <= 0.0) continue;
    if (std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
  }
}

// Ratio of uniforms without shift, for 0 <= lambda < 1 and moderate omega.
double gig_rou_noshift(double lambda, double omega, Rng& rng) {
  const double t = 0.5 * (lambda - 1.0);
  const double s = 0.25 * omega;
  const double xm = gig_mode(lambda, omega);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);
  const double ym = ((lambda + 1.0) + std::sqrt((lambda + 1.0) * (lambda + 1.0) + omega * omega)) / omega;
  const double um = std::exp(0.5 * (lambda + 1.0) * std::log(ym) - s * (ym + 1.0 / ym) - nc);
  for (;;) {
    const double u = um * rng.uniform();
    const double v = rng.uniform_pos();
    const double x = u / v;
    if (x <= 0.0) continue;
    if (std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
  }
}

// Rejection from a three-piece hat (constant, power, exponential), for
// 0 <= lambda < 1 and small omega.
double gig_concave_hat(double lambda, double omega, Rng& rng) {
  const double xm = gig_mode(lambda, omega);
  const double x0 = omega / (1.0 - lambda);
  const double xs = std::max(x0, 2.0 / omega);

  const double k1 = std::exp((lambda - 1.0) * std::log(xm) - 0.5 * omega * (xm + 1.0 / xm));
  const double a1 = k1 * x0;
  double k2 = 0.0, a2 = 0.0;
  if (x0 < 2.0 / omega) {
    k2 = std::exp(-omega);
    a2 = lambda > 0.0 ? k2 * (std::pow(2.0 / omega, lambda) - std::pow(x0, lambda)) / lambda
                      : k2 * std::log(2.0 / (omega * omega));
  }
  const double k3 = std::pow(xs, lambda - 1.0);
  const double a3 = 2.0 * k3 * std::exp(-xs * omega / 2.0) / omega;
  const double total = a1 + a2 + a3;

  for (;;) {
    double v = total * rng.uniform();
    double x, hx;
    if (v <= a1) {
      x = x0 * v / a1;
      hx = k1;
    } else if (v <= a1 + a2) {
      v -= a1;
      x = lambda > 0.0 ? std::pow(std::pow(x0, lambda) + v * lambda / k2, 1.0 / lambda)
                       : omega * std::exp(std::exp(omega) * v);
      hx = k2 * std::pow(x, lambda - 1.0);
    } else {
      v -= a1 + a2;
      x = -2.0 / omega * std::log(std::exp(-xs * omega / 2.0) - v * omega / (2.0 * k3));
      hx = k3 * std::exp(-x * omega / 2.0);
    }
    if (!(x > 0.0)) continue;
    const double u = rng.uniform_pos() * hx;
    if (std::log(u) <= (lambda - 1.0) * std::log(x) - 0.5 * omega * (x + 1.0 / x)) return x;
  }
}

double gig_standard(double lambda, double omega, Rng& rng) {
  if (lambda >= 1.0 || omega > 1.0) return gig_rou_shift(lambda, omega, rng);
  if (omega >= std::min(0.5, 2.0 / 3.0 * std::sqrt(1.0 - lambda))) return gig_rou_noshift(lambda, omega, rng);
  return gig_concave_hat(lambda, omega, rng);
}

}  // namespace

VectorXd HorseshoeBlock::prior_variance() const {
  VectorXd v(local.size());
  for (Eigen::Index i = 0; i < local.size(); ++i) v(i) = local(i) * global(group[static_cast<std::size_t>(i)]);
  return v;
}

HorseshoeBlock make_horseshoe(Eigen::Index n) {
  HorseshoeBlock b;
  b.local = VectorXd::Ones(n);
  b.local_aux = VectorXd::Ones(n);
  b.global = VectorXd::Ones(1);
  b.global_aux = VectorXd::Ones(1);
  b.group.assign(static_cast<std::size_t>(n), 0);
  return b;
}

HorseshoeBlock make_column_horseshoe(Eigen::Index rows, Eigen::Index cols) {
  HorseshoeBlock b;
  b.local = VectorXd::Ones(rows * cols);
  b.local_aux = VectorXd::Ones(rows * cols);
  b.global = VectorXd::Ones(cols);
  b.global_aux = VectorXd::Ones(cols);
  b.group.resize(static_cast<std::size_t>(rows * cols));
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) b.group[static_cast<std::size_t>(j * rows + i)] = static_cast<int>(j);
  return b;
}

void sample_local_aux(HorseshoeBlock& b, Rng& rng) {
  for (Eigen::Index i = 0; i < b.size(); ++i) b.local_aux(i) = inv_gamma1(1.0 + 1.0 / b.local(i), rng);
}

void sample_global_aux(HorseshoeBlock& b, Rng& rng) {
  for (int g = 0; g < b.n_groups(); ++g) b.global_aux(g) = inv_gamma1(1.0 + 1.0 / b.global(g), rng);
}

void sample_local_scales(HorseshoeBlock& b, const Eigen::Ref<const VectorXd>& coeffs, Rng& rng) {
  if (coeffs.size() != b.size()) throw DimensionError("horseshoe block and coefficients differ in length");
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    const double g = b.global(b.group[static_cast<std::size_t>(i)]);
    b.local(i) = inv_gamma1(1.0 / b.local_aux(i) + coeffs(i) * coeffs(i) / (2.0 * g), rng);
  }
}

void sample_global_scales(HorseshoeBlock& b, const Eigen::Ref<const VectorXd>& coeffs, Rng& rng) {
  if (coeffs.size() != b.size()) throw DimensionError("horseshoe block and coefficients differ in length");
  VectorXd ss = VectorXd::Zero(b.n_groups());
  VectorXd count = VectorXd::Zero(b.n_groups());
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    const int g = b.group[static_cast<std::size_t>(i)];
    ss(g) += coeffs(i) * coeffs(i) / b.local(i);
    count(g) += 1.0;
  }
  // Shape (n_g + 1) / 2: the half-Cauchy prior contributes 1/2 and each of
  // the n_g coefficients in the group another 1/2.
  for (int g = 0; g < b.n_groups(); ++g)
    b.global(g) = clamp_positive(rng.inv_gamma(0.5 * (count(g) + 1.0), 1.0 / b.global_aux(g) + 0.5 * ss(g)));
}

void sample_horseshoe(HorseshoeBlock& b, const Eigen::Ref<const VectorXd>& coeffs, Rng& rng) {
  sample_local_aux(b, rng);
  sample_global_aux(b, rng);
  sample_local_scales(b, coeffs, rng);
  sample_global_scales(b, coeffs, rng);
}

double sample_gig(double lambda, double chi, double psi, Rng& rng) {
  if (!std::isfinite(lambda) || !std::isfinite(chi) || !std::isfinite(psi) || chi < 0.0 || psi < 0.0)
    throw ParameterError("GIG parameters must be finite with chi, psi >= 0");
  if (chi == 0.0 && psi == 0.0) throw ParameterError("GIG needs chi > 0 or psi > 0");
  if (chi == 0.0) {
    // Gamma limit; the improper lambda <= 0 boundary is nudged inside.
    return clamp_positive(rng.gamma(std::max(lambda, 1e-8), psi / 2.0));
  }
  if (psi == 0.0) {
    if (lambda >= 0.0) throw ParameterError("GIG with psi = 0 needs lambda < 0");
    return clamp_positive(rng.inv_gamma(-lambda, chi / 2.0));
  }

  const double omega = std::sqrt(chi * psi);
  const double alpha = std::sqrt(chi / psi);
  const double lam = std::abs(lambda);
  double x;
  if (omega < 1e-10 && lam >= 1.0) {
    // The 1/x term is negligible: standardized draw is Gamma(lam, omega/2).
    x = rng.gamma(lam, omega / 2.0);
  } else {
    x = gig_standard(lam, omega, rng);
  }
  return clamp_positive(lambda < 0.0 ? alpha / x : alpha * x);
}

double sample_process_variance(const Eigen::Ref<const VectorXd>& eta, double process_var_scale, Rng& rng) {
  if (eta.size() < 1) throw DimensionError("process variance needs at least one innovation");
  if (!(process_var_scale > 0.0)) throw ParameterError("B_v must be positive");
  const double n = static_cast<double>(eta.size());
  return sample_gig(0.5 - n / 2.0, eta.squaredNorm(), 1.0 / (2.0 * process_var_scale), rng);
}

}  // namespace tvpbart
