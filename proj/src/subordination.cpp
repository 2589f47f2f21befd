#include "nlpd/subordination.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "pchip.hpp"
#include <boost/math/tools/minima.hpp>

#include "nlpd/errors.hpp"
#include "nlpd/quadrature.hpp"
#include "nlpd/special.hpp"

namespace nlpd {

namespace {

using cplx = std::complex<double>;

double stable_density(double alpha, double s, double t) {
  const double ta = std::pow(t, -alpha);
  return ta * special::wright_m(alpha, s * ta);
}

// Two hyperbolic contours with different geometry; agreement certifies the value.
double numeric_density(const Bernstein& phi, double s, double t, double cross_check) {
  const laplace::Transform F = [&](cplx z) {
    const cplx p = phi.phi(z);
    return p / z * std::exp(-s * p);
  };
  const double sector = phi.analytic_sector();
  const double v = laplace::hyperbola(F, t, sector, 1e-11);
  if (cross_check > 0.0) {
    const double w = laplace::hyperbola(F, t, 0.7 * sector, 1e-9);
    if (!std::isfinite(v) || std::abs(v - w) > cross_check * std::max(1.0, std::abs(v))) {
      std::ostringstream msg;
      msg.precision(10);
      msg << "inverse density inversion disagreement at s=" << s << ", t=" << t << ": " << v
          << " vs " << w;
      throw NumericFailure(msg.str());
    }
  }
  return std::max(v, 0.0);
}

}  // namespace

InverseSubordinatorDensity::InverseSubordinatorDensity(Bernstein phi, SubordinationOptions options)
    : phi_(std::move(phi)), options_(options) {
  inversion_ = (phi_.kind() == BernsteinKind::Stable && !options_.force_numeric)
                   ? Inversion::ClosedFormStable
                   : Inversion::NumericLaplace;
}

double InverseSubordinatorDensity::operator()(double s, double t) const {
  if (!(t > 0.0)) throw DomainError("inverse_density: t must be positive");
  if (!(s >= 0.0)) throw DomainError("inverse_density: s must be nonnegative");
  if (inversion_ == Inversion::ClosedFormStable) return stable_density(phi_.alpha(), s, t);
  return numeric_density(phi_, s, t, options_.cross_check);
}

double InverseSubordinatorDensity::tail_bound(double s, double t) const {
  if (s <= 0.0) return 1.0;
  // lambda t - s Phi(lambda) is convex in lambda; minimize over log lambda.
  auto g = [&](double u) {
    const double lam = std::exp(u);
    return lam * t - s * phi_.phi(lam);
  };
  const auto r = boost::math::tools::brent_find_minima(g, -30.0, 30.0, 40);
  return std::min(1.0, std::exp(r.second));
}

double InverseSubordinatorDensity::tail_cutoff(double t, double mass) const {
  double hi = 1.0;
  while (tail_bound(hi, t) > mass) {
    hi *= 2.0;
    if (hi > 1e12) throw NumericFailure("tail_cutoff: bound does not decay");
  }
  double lo = 0.0;
  for (int i = 0; i < 50 && hi - lo > 1e-6 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (tail_bound(mid, t) > mass ? lo : hi) = mid;
  }
  return hi;
}

Estimate InverseSubordinatorDensity::subordinate(const std::function<double(double)>& kernel,
                                                 double t) const {
  if (!(t > 0.0)) throw DomainError("subordinate: t must be positive");
  const double s_star = tail_cutoff(t, options_.tail_mass);
  auto integrand = [&](double s) { return kernel(s) * (*this)(s, t); };
  // Kernels such as classical transition densities are singular at s = 0;
  // tanh-sinh takes the first piece.
  const double split = std::min(s_star, 0.25 * s_star);
  const quad::Result a = quad::endpoint_singular(integrand, 0.0, split, options_.rel_tol);
  const quad::Result b = quad::adaptive(integrand, split, s_star, options_.rel_tol, 12);
  Estimate est{a.value + b.value, a.error + b.error};

  // Tail-growth check: dyadic blocks beyond s* weighted by the Chernoff bound.
  double tail = 0.0;
  double s = s_star;
  for (int j = 0; j < 12; ++j) {
    const double k_max = std::max(std::abs(kernel(s)), std::abs(kernel(2.0 * s)));
    tail += k_max * tail_bound(s, t);
    s *= 2.0;
  }
  if (!std::isfinite(tail) || tail > 1e-6 * (1.0 + std::abs(est.value))) {
    std::ostringstream msg;
    msg << "subordinate: kernel grows faster than the inverse-subordinator tail decays "
        << "(tail estimate " << tail << ")";
    throw NumericFailure(msg.str());
  }
  est.error += tail;
  return est;
}

RenewalFunction::RenewalFunction(Bernstein phi, double t_max)
    : phi_(std::move(phi)), t_max_(t_max) {
  if (phi_.kind() == BernsteinKind::Stable) return;
  const double lo = 1e-6;
  const int n = static_cast<int>(std::ceil(std::log10(t_max_ / lo) * 30)) + 1;
  std::vector<double> x(n), y(n);
  for (int i = 0; i < n; ++i) {
    x[i] = std::log(lo) + (std::log(t_max_) - std::log(lo)) * i / (n - 1);
    y[i] = std::log(exact(std::exp(x[i])));
  }
  auto interp = std::make_shared<boost::math::interpolators::pchip<std::vector<double>>>(
      std::move(x), std::move(y));
  table_ = [interp](double t) { return std::exp((*interp)(std::log(t))); };
}

double RenewalFunction::exact(double t) const {
  if (phi_.kind() == BernsteinKind::Stable)
    return std::pow(t, phi_.alpha()) / std::tgamma(1.0 + phi_.alpha());
  const laplace::Transform F = [&](cplx z) { return 1.0 / (z * phi_.phi(z)); };
  return laplace::invert(F, t);
}

double RenewalFunction::operator()(double t) const {
  if (!(t >= 0.0)) throw DomainError("renewal: t must be nonnegative");
  if (t == 0.0) return 0.0;
  if (table_ && t >= 1e-6 && t <= t_max_) return table_(t);
  return exact(t);
}

}  // namespace nlpd
