#pragma once

#include <complex>

namespace nlpd::special {

using cplx = std::complex<double>;

/// Complex log-gamma via the Lanczos approximation (g = 7, 9 terms) with
/// reflection for Re z < 1/2. The imaginary part is not branch-continuous;
/// use it only through exp() or the real part.
cplx log_gamma(cplx z);
cplx gamma(cplx z);

/// 1/Gamma(x) for real x, zero at the poles.
double recip_gamma(double x);

/// Gauss hypergeometric 2F1(a, b; c; z) for complex parameters and real z < 1.
/// |z| <= 1/2 sums the series directly; -2 <= z < -1/2 goes through the Pfaff
/// transformation; z < -2 uses the 1/z connection formula; 1/2 < z < 1 uses the
/// 1 - z connection formula. Throws NumericFailure when a series stalls.
cplx hyp2f1(cplx a, cplx b, cplx c, double z);

/// One-parameter Mittag-Leffler function on the negative axis, E_alpha(-x),
/// for alpha in (0, 1] and x >= 0. Taylor series for x <= 1, the
/// completely-monotone integral representation beyond.
double mittag_leffler_neg(double alpha, double x);

/// Wright M-function M_alpha(z), z >= 0, alpha in (0, 1). The inverse
/// alpha-stable subordinator has density t^{-alpha} M_alpha(s t^{-alpha}).
double wright_m(double alpha, double z);

/// Kanter's function A(phi) for the one-sided stable law with Laplace
/// transform exp(-lambda^alpha); S = (A(U)/E)^{(1-alpha)/alpha} with
/// U ~ Uniform(0, pi), E ~ Exp(1).
double kanter_a(double alpha, double phi);

/// Exponential integral E_1(x), x > 0.
double expint_e1(double x);

}  // namespace nlpd::special
