#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/numeric/odeint.hpp>

#include "nlpd/errors.hpp"
#include "nlpd/pearson.hpp"
#include "nlpd/special.hpp"

namespace nlpd {

namespace {

using cplx = std::complex<double>;

// Rescaling of the printed spectral weights. Both a_1 and a_2 come out of the
// Weyl-Titchmarsh density per unit of the variable -i Delta, so converting to a
// density in lambda brings in d(-i Delta^2)/d lambda; see the Parseval test.
double weight_jacobian(const PearsonFamily& f) {
  if (const auto* p = std::get_if<FSParams>(&f.params())) return (p->beta - 2.0) / (2.0 * p->theta);
  const auto& p = std::get<RGParams>(f.params());
  return (p.beta - 1.0) / p.theta;
}

}  // namespace

ContinuousSpectrum::ContinuousSpectrum(const PearsonFamily& family) : family_(family) {
  if (family.category() != SpectralCategory::II)
    throw UnsupportedError("continuous spectrum: explicit eigenfunctions are available for FS and RG only");
  cutoff_ = *family.spectrum_meta().cutoff;
}

void ContinuousSpectrum::check_lambda(double lambda) const {
  if (!(lambda > cutoff_))
    throw DomainError("continuous spectrum: lambda must exceed the cutoff " + std::to_string(cutoff_));
}

std::complex<double> ContinuousSpectrum::delta(double lambda) const {
  if (const auto* p = std::get_if<FSParams>(&family_.params())) {
    const double b = p->beta;
    return std::sqrt(cplx(b * b / 16.0 - lambda * (b - 2.0) / (2.0 * p->theta), 0.0));
  }
  const auto& p = std::get<RGParams>(family_.params());
  const double b = p.beta;
  return 0.5 * std::sqrt(cplx(b * b - 4.0 * lambda * (b - 1.0) / p.theta, 0.0));
}

double ContinuousSpectrum::eigenfunction(double x, double lambda) const {
  const double xs[1] = {x};
  return eigenfunction(std::span<const double>(xs, 1), lambda)[0];
}

std::vector<double> ContinuousSpectrum::eigenfunction(std::span<const double> xs, double lambda) const {
  check_lambda(lambda);
  for (double x : xs)
    if (!family_.contains(x)) throw DomainError("continuous eigenfunction: x outside the state space");
  return sweep(xs, lambda);
}

// Both eigenfunctions are evaluated by a series near x = 0 and the eigenvalue
// equation D f'' + mu f' + lambda f = 0 beyond. In xi = log x it reads
//   f_xi_xi = f_xi - ((a0 e^{-xi} + a1) f_xi + lambda f) / (d1 e^{-xi} + d2).
// The companion solution (x^{1 - alpha/2} for FS, e^{alpha/x} for RG) dies out
// going forward, so the sweep is stable.
//
// FS: f_1 = 2F1(a, b; alpha/2; -alpha x/beta) with a, b = -beta/4 +- Delta.
// The hypergeometric series is only used where |a b z| is small: for large
// |Delta| it cancels catastrophically at moderate z.
//
// RG: f_2 = alpha^{(beta+1)/2} 2F0(a, b;; -x/alpha) with a, b = -beta/2 +- Delta.
// The 2F0 series is asymptotic, so it only seeds the solution, truncated at
// its smallest term.
std::vector<double> ContinuousSpectrum::sweep(std::span<const double> xs, double lambda) const {
  const bool fs = family_.kind() == FamilyKind::FisherSnedecor;
  const cplx d = delta(lambda);
  double alpha, beta, c = 0.0, amp = 1.0;
  cplx a, b;
  if (fs) {
    const auto& p = std::get<FSParams>(family_.params());
    alpha = p.alpha;
    beta = p.beta;
    a = -beta / 4.0 + d;
    b = -beta / 4.0 - d;
    c = alpha / 2.0;
  } else {
    const auto& p = std::get<RGParams>(family_.params());
    alpha = p.alpha;
    beta = p.beta;
    a = -beta / 2.0 + d;
    b = -beta / 2.0 - d;
    amp = std::pow(alpha, 0.5 * (beta + 1.0));
  }

  // Series value and x d/dx at x; returns the last term used, relative to f.
  auto seed = [&](double x, double& f, double& fxi) {
    cplx poch = 1.0;
    double term_mag_prev = INFINITY;
    f = 1.0;
    fxi = 0.0;
    double zk = 1.0, denom = 1.0;
    const double z = fs ? -alpha * x / beta : -x / alpha;
    for (int k = 1; k < 2000; ++k) {
      poch *= (a + double(k - 1)) * (b + double(k - 1));
      zk *= z;
      denom *= k * (fs ? c + (k - 1) : 1.0);
      const double t = poch.real() * zk / denom;
      if (!fs && std::abs(t) > term_mag_prev) break;
      f += t;
      fxi += k * t;
      term_mag_prev = std::abs(t);
      if (std::abs(t) < 1e-18 * std::max(std::abs(f), 1e-300) && k > 2) break;
    }
    return term_mag_prev / std::max(std::abs(f), 1e-300);
  };

  const double ab = std::abs(a * b);
  // Seed point. For RG the companion mode decays at rate ~ alpha/x, so the
  // stretch beyond the seed is stiff for explicit steps; seed as far out as the
  // asymptotic series allows (smallest term below 1e-16).
  double x0 = 0.01 * c * beta / (alpha * (1.0 + ab));
  double f0 = 0.0, fxi0 = 0.0;
  if (fs) {
    seed(x0, f0, fxi0);
  } else {
    x0 = 2.0 * alpha / (1.0 + std::norm(a));
    while (seed(x0, f0, fxi0) > 1e-16) x0 *= 0.5;
  }
  const auto acoef = family_.drift_coefficients();
  const auto dcoef = family_.diffusion_coefficients();

  std::vector<std::size_t> order(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return xs[i] < xs[j]; });

  // y'' = y' - (mu(xi) y' + lambda y) / D(xi) with mu = a0 e^{-xi} + a1, D = d1 e^{-xi} + d2.
  auto mu_of = [&](double t) { return acoef[0] * std::exp(-t) + acoef[1]; };
  auto d_of = [&](double t) { return dcoef[1] * std::exp(-t) + dcoef[2]; };
  auto rhs = [&](const std::array<double, 2>& s, std::array<double, 2>& ds, double t) {
    ds[0] = s[1];
    ds[1] = s[1] - (mu_of(t) * s[1] + lambda * s[0]) / d_of(t);
  };

  std::vector<double> out(xs.size());
  double xi = std::log(x0);
  using State = std::array<double, 2>;
  State y{f0, fxi0};
  namespace odeint = boost::numeric::odeint;
  // Pure relative control: for large lambda the RG solution shrinks by many
  // orders of magnitude before the weight restores it.
  auto stepper = odeint::make_dense_output(1e-300, 1e-12, odeint::runge_kutta_dopri5<State>());
  const double h0 = std::min(1e-3, 0.1 / std::sqrt(1.0 + ab));
  for (std::size_t i : order) {
    const double x = xs[i];
    if (x <= x0) {
      double f, fxi;
      seed(x, f, fxi);
      out[i] = amp * f;
      continue;
    }
    const double target = std::log(x);
    if (target > xi) {
      odeint::integrate_adaptive(stepper, rhs, y, xi, target, h0);
      xi = target;
    }
    out[i] = amp * y[0];
  }
  return out;
}

double ContinuousSpectrum::log_weight(double lambda) const {
  check_lambda(lambda);
  const cplx d = delta(lambda);
  cplx log_mod;  // log of the quantity inside |.|^2
  if (const auto* p = std::get_if<FSParams>(&family_.params())) {
    const double al = p->alpha, be = p->beta;
    const double log_beta_fn = std::lgamma(al / 2) + std::lgamma(be / 2) - std::lgamma((al + be) / 2);
    log_mod = 0.5 * log_beta_fn + special::log_gamma(-be / 4.0 + d) +
              special::log_gamma(al / 2.0 + be / 4.0 + d) - std::lgamma(al / 2.0) -
              special::log_gamma(1.0 + 2.0 * d);
  } else {
    const auto& rg = std::get<RGParams>(family_.params());
    log_mod = 0.5 * std::lgamma(rg.beta) + special::log_gamma(-rg.beta / 2.0 + d) -
              0.5 * (rg.beta + 1.0) * std::log(rg.alpha) - special::log_gamma(1.0 + 2.0 * d);
  }
  // -i Delta is real and positive above the cutoff.
  const cplx lead = cplx(0.0, -1.0) * d;
  if (std::abs(lead.imag()) > 1e-10 * std::max(1.0, std::abs(lead)) || !(lead.real() > 0.0))
    throw NumericFailure("continuous weight: imaginary residue above 1e-10");
  return std::log(lead.real()) + 2.0 * log_mod.real() + std::log(weight_jacobian(family_));
}

double ContinuousSpectrum::weight(double lambda) const { return std::exp(log_weight(lambda)); }

}  // namespace nlpd
