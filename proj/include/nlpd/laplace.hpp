#pragma once

#include <complex>
#include <functional>

namespace nlpd::laplace {

using cplx = std::complex<double>;
/// Laplace transform F(z), analytic off the closed negative real axis and
/// satisfying F(conj z) = conj F(z).
using Transform = std::function<cplx(cplx)>;

/// Fixed Talbot contour with M nodes.
double talbot(const Transform& F, double t, int M = 32);

/// Gaver-Stehfest with N (even) terms; uses F on the positive real axis only.
double stehfest(const Transform& F, double t, int N = 14);

/// Trapezoidal rule on a left-opening hyperbola. `sector` is the extra
/// half-angle beyond pi/2 in which F is bounded; the contour keeps its
/// asymptotes strictly inside that sector. Suited to transforms like
/// exp(-s Phi(z)) that grow outside a sector narrower than Talbot needs.
double hyperbola(const Transform& F, double t, double sector, double tol = 1e-11);

enum class Method { Talbot, Hyperbola };

struct Options {
  Method method = Method::Talbot;
  int talbot_nodes = 32;
  int stehfest_terms = 14;
  double sector = 1.2;        // hyperbola only
  double cross_check = 1e-4;  // relative to max(1, |value|); <= 0 disables
};

/// Inversion with the Gaver-Stehfest cross-check. Throws NumericFailure when
/// the two disagree beyond options.cross_check.
double invert(const Transform& F, double t, const Options& options = {});

}  // namespace nlpd::laplace
