#include "nlpd/special.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/expint.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "nlpd/errors.hpp"

namespace nlpd::special {

namespace {

constexpr double kPi = std::numbers::pi;

constexpr std::array<double, 9> kLanczos = {
    0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
    771.32342877765313,   -176.61502916214059,   12.507343278686905,
    -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};

// log(sin(pi z)) without overflow for large |Im z|.
cplx log_sin_pi(cplx z) {
  const cplx i(0.0, 1.0);
  if (std::abs(z.imag()) < 20.0) return std::log(std::sin(kPi * z));
  // sin(pi z) = (e^{i pi z} - e^{-i pi z}) / (2i); keep the dominant exponential.
  if (z.imag() > 0.0)
    return -i * kPi * z + std::log(1.0 - std::exp(2.0 * i * kPi * z)) - std::log(2.0 * i);
  return i * kPi * z + std::log(1.0 - std::exp(-2.0 * i * kPi * z)) - std::log(-2.0 * i);
}

cplx log_gamma_right(cplx z) {
  z -= 1.0;
  cplx x = kLanczos[0];
  for (std::size_t k = 1; k < kLanczos.size(); ++k) x += kLanczos[k] / (z + double(k));
  const cplx t = z + 7.5;
  return 0.5 * std::log(2.0 * kPi) + (z + 0.5) * std::log(t) - t + std::log(x);
}

bool near_nonpositive_integer(cplx z) {
  return std::abs(z.imag()) < 1e-14 && z.real() <= 0.0 &&
         std::abs(z.real() - std::round(z.real())) < 1e-14;
}

// Plain Gauss series; returns false when it fails to converge.
bool series_2f1(cplx a, cplx b, cplx c, cplx z, cplx& out, int max_terms = 20000) {
  cplx term = 1.0, sum = 1.0;
  for (int k = 0; k < max_terms; ++k) {
    term *= (a + double(k)) * (b + double(k)) / ((c + double(k)) * double(k + 1)) * z;
    sum += term;
    if (std::abs(term) <= 1e-17 * std::abs(sum) && k > 2) {
      out = sum;
      return true;
    }
    if (term == 0.0) {
      out = sum;
      return true;
    }
  }
  return false;
}

cplx checked_series(cplx a, cplx b, cplx c, cplx z) {
  cplx out;
  if (!series_2f1(a, b, c, z, out))
    throw NumericFailure("hyp2f1: hypergeometric series did not converge");
  return out;
}

}  // namespace

cplx log_gamma(cplx z) {
  if (near_nonpositive_integer(z))
    throw DomainError("log_gamma: pole at non-positive integer");
  if (z.real() < 0.5) return std::log(kPi) - log_sin_pi(z) - log_gamma_right(1.0 - z);
  return log_gamma_right(z);
}

cplx gamma(cplx z) { return std::exp(log_gamma(z)); }

double recip_gamma(double x) {
  if (x <= 0.0 && x == std::round(x)) return 0.0;
  if (x > 170.0) return 0.0;
  return 1.0 / std::tgamma(x);
}

cplx hyp2f1(cplx a, cplx b, cplx c, double z) {
  if (!(z < 1.0)) throw DomainError("hyp2f1: requires z < 1");
  if (z == 0.0) return 1.0;
  if (std::abs(z) <= 0.5) return checked_series(a, b, c, z);

  const cplx ba = b - a;
  const bool degenerate = std::abs(ba - cplx(std::round(ba.real()), 0.0)) < 1e-6;
  if (z < -2.0 && !degenerate) {
    // 1/z connection: two terms, each a convergent series in 1/z.
    const cplx lg_c = log_gamma(c);
    const cplx t1 = std::exp(lg_c + log_gamma(b - a) - log_gamma(b) - log_gamma(c - a) -
                             a * std::log(-z)) *
                    checked_series(a, a - c + 1.0, a - b + 1.0, 1.0 / z);
    const cplx t2 = std::exp(lg_c + log_gamma(a - b) - log_gamma(a) - log_gamma(c - b) -
                             b * std::log(-z)) *
                    checked_series(b, b - c + 1.0, b - a + 1.0, 1.0 / z);
    return t1 + t2;
  }
  if (z < 0.0) {
    // Pfaff: F(a,b;c;z) = (1-z)^{-a} F(a, c-b; c; z/(z-1)). The 1/z formula is
    // singular when b - a is an integer, so that case sums the slower series.
    const double w = z / (z - 1.0);
    cplx out;
    if (!series_2f1(a, c - b, c, w, out, 200000))
      throw NumericFailure("hyp2f1: Pfaff series did not converge");
    return std::pow(1.0 - z, -a) * out;
  }
  // 0 < z < 1: direct series; adequate away from the unit singularity.
  cplx out;
  if (!series_2f1(a, b, c, z, out, 200000))
    throw NumericFailure("hyp2f1: series too slow near z = 1");
  return out;
}

double mittag_leffler_neg(double alpha, double x) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("mittag_leffler: alpha must lie in (0,1]");
  if (!(x >= 0.0)) throw DomainError("mittag_leffler: argument must be nonnegative");
  if (alpha == 1.0) return std::exp(-x);
  if (x == 0.0) return 1.0;
  if (x <= 1.0) {
    double sum = 0.0, xk = 1.0;
    for (int k = 0; k < 400; ++k) {
      const double term = xk * recip_gamma(alpha * k + 1.0);
      sum += (k % 2 == 0) ? term : -term;
      if (k > 3 && term < 1e-18) break;
      xk *= x;
    }
    return sum;
  }
  // E_a(-x) = sin(a pi)/(a pi) * int_0^inf exp(-w^{1/a}) x / (w^2 + 2 w x cos(a pi) + x^2) dw
  const double c = std::cos(alpha * kPi);
  auto f = [&](double w) {
    const double e = std::exp(-std::pow(w, 1.0 / alpha));
    return e * x / (w * w + 2.0 * w * x * c + x * x);
  };
  const double w_max = std::pow(40.0, alpha);
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  double err = 0.0;
  // Split at the kernel's peak so the adaptive rule sees both scales.
  const double w_peak = std::min(w_max, x * std::max(std::abs(c), 1e-3));
  double val = GK::integrate(f, 0.0, w_peak, 15, 1e-12, &err);
  val += GK::integrate(f, w_peak, w_max, 15, 1e-12, &err);
  return std::sin(alpha * kPi) / (alpha * kPi) * val;
}

double kanter_a(double alpha, double phi) {
  const double s = std::sin(phi);
  return std::pow(std::sin(alpha * phi), alpha / (1.0 - alpha)) * std::sin((1.0 - alpha) * phi) /
         std::pow(s, 1.0 / (1.0 - alpha));
}

double wright_m(double alpha, double z) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("wright_m: alpha must lie in (0,1)");
  if (!(z >= 0.0)) throw DomainError("wright_m: argument must be nonnegative");
  if (z <= 1.0) {
    // M(z) = (1/pi) sum_k (-z)^k / k! * Gamma(alpha(k+1)) sin(pi alpha (k+1))
    double sum = 0.0;
    for (int k = 0; k < 200; ++k) {
      const double ak = alpha * (k + 1);
      const double mag = (k == 0 ? 0.0 : k * std::log(z)) - std::lgamma(k + 1.0) + std::lgamma(ak);
      if (z == 0.0 && k > 0) break;
      const double term = std::exp(mag) * std::sin(kPi * ak);
      sum += (k % 2 == 0) ? term : -term;
      if (k > 5 && std::exp(mag) < 1e-18) break;
    }
    return sum / kPi;
  }
  // Kanter's integral: M(z) = z^{a/(1-a)} / ((1-a) pi) int_0^pi A e^{-A z^{1/(1-a)}} dphi
  const double zp = std::pow(z, 1.0 / (1.0 - alpha));
  auto f = [&](double phi) {
    if (phi <= 0.0 || phi >= kPi) return 0.0;
    const double A = kanter_a(alpha, phi);
    const double e = A * zp;
    return e > 700.0 ? 0.0 : A * std::exp(-e);
  };
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  double err = 0.0;
  const double val = GK::integrate(f, 0.0, kPi, 15, 1e-12, &err);
  return std::pow(z, alpha / (1.0 - alpha)) * val / ((1.0 - alpha) * kPi);
}

double expint_e1(double x) {
  if (!(x > 0.0)) throw DomainError("expint_e1: argument must be positive");
  if (x > 700.0) return 0.0;
  return boost::math::expint(1, x);
}

}  // namespace nlpd::special
