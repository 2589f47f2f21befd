#include "nlpd/relaxation.hpp"

#include <algorithm>
#include <cmath>

#include "nlpd/errors.hpp"
#include "nlpd/special.hpp"

namespace nlpd {

namespace {
using cplx = std::complex<double>;
}

RelaxationEvaluator::RelaxationEvaluator(Bernstein phi, laplace::Options options)
    : phi_(std::move(phi)), options_(options) {
  method_ = phi_.kind() == BernsteinKind::Stable ? Method::MittagLeffler : Method::LaplaceInversion;
}

double RelaxationEvaluator::operator()(double t, double lambda) const {
  if (!(t >= 0.0)) throw DomainError("relaxation: t must be nonnegative");
  if (!(lambda >= 0.0)) throw DomainError("relaxation: lambda must be nonnegative");
  if (t == 0.0 || lambda == 0.0) return 1.0;
  if (method_ == Method::MittagLeffler)
    return special::mittag_leffler_neg(phi_.alpha(), lambda * std::pow(t, phi_.alpha()));
  const laplace::Transform F = [&](cplx z) {
    const cplx p = phi_.phi(z);
    return p / (z * (p + lambda));
  };
  return std::clamp(laplace::invert(F, t, options_), 0.0, 1.0);
}

double RelaxationEvaluator::asymptotic_coefficient(int k, double t) const {
  if (k < 1) throw DomainError("asymptotic_coefficient: k must be at least 1");
  if (!(t > 0.0)) throw DomainError("asymptotic_coefficient: t must be positive");
  if (k == 1) return phi_.levy_tail(t);
  if (method_ == Method::MittagLeffler) {
    const double a = phi_.alpha();
    return std::pow(t, -k * a) * special::recip_gamma(1.0 - k * a);
  }
  const laplace::Transform F = [&](cplx z) { return std::pow(phi_.phi(z), double(k)) / z; };
  return laplace::invert(F, t, options_);
}

double RelaxationEvaluator::remainder2(double t, double lambda) const {
  if (!(t > 0.0) || !(lambda > 0.0))
    throw DomainError("remainder2: t and lambda must be positive");
  if (method_ == Method::MittagLeffler) {
    return (*this)(t, lambda) - asymptotic_coefficient(1, t) / lambda +
           asymptotic_coefficient(2, t) / (lambda * lambda);
  }
  const laplace::Transform F = [&](cplx z) {
    const cplx p = phi_.phi(z);
    return p * p * p / (z * lambda * lambda * (p + lambda));
  };
  return laplace::invert(F, t, options_);
}

std::vector<double> graded_grid(double T, int n, double q) {
  if (n < 1 || !(T > 0.0)) throw DomainError("graded_grid: need n >= 1 and T > 0");
  std::vector<double> g(n + 1);
  for (int k = 0; k <= n; ++k) g[k] = T * std::pow(double(k) / n, q);
  g[n] = T;
  return g;
}

double nonlocal_derivative(const Bernstein& phi, const SampledFunction& u, double t) {
  const auto& ts = u.t;
  const auto& us = u.u;
  if (ts.size() != us.size() || ts.empty())
    throw DomainError("nonlocal_derivative: sample arrays must be nonempty and equal-sized");
  if (ts.front() != 0.0) throw DomainError("nonlocal_derivative: samples must start at t = 0");
  if (!(t > 0.0) || t > ts.back() * (1.0 + 1e-12))
    throw DomainError("nonlocal_derivative: t must lie in (0, T]");
  const auto end = std::upper_bound(ts.begin(), ts.end(), t * (1.0 + 1e-14));
  const std::size_t n_in = static_cast<std::size_t>(end - ts.begin());
  if (n_in < 8)
    throw ResolutionError("nonlocal_derivative: fewer than 8 samples in [0, t]");

  // Product integration: slope_k * [I(t - tau_k) - I(t - tau_{k+1})] with I the
  // exact integrated tail, so the kernel singularity at tau = t costs nothing.
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < ts.size() && ts[k] < t; ++k) {
    const double a = ts[k];
    const double b = std::min(ts[k + 1], t);
    const double slope = (us[k + 1] - us[k]) / (ts[k + 1] - ts[k]);
    acc += slope * (phi.integrated_tail(t - a) - phi.integrated_tail(t - b));
  }
  return acc;
}

double stationary_correlation(const RelaxationEvaluator& relax, const RenewalFunction& renewal,
                              double lambda1, double t, double s) {
  if (!(t >= s && s >= 0.0)) throw DomainError("stationary_correlation: need t >= s >= 0");
  if (s == 0.0) return relax(t, lambda1);
  // Stieltjes trapezoid on nodes graded toward both ends: dU is singular at 0
  // and E(t - tau) has an unbounded derivative at tau = t when s = t.
  const int n = 2000;
  const double q = 3.0;
  double acc = 0.0;
  double prev_u = 0.0, prev_e = relax(t, lambda1);
  for (int k = 1; k <= n; ++k) {
    const double x = double(k) / n;
    const double w = std::pow(x, q) / (std::pow(x, q) + std::pow(1.0 - x, q));
    const double tau = (k == n) ? s : s * w;
    const double u = renewal(tau);
    const double e = relax(std::max(t - tau, 0.0), lambda1);
    acc += 0.5 * (prev_e + e) * (u - prev_u);
    prev_u = u;
    prev_e = e;
  }
  return relax(t, lambda1) + lambda1 * acc;
}

}  // namespace nlpd
