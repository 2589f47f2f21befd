#pragma once

#include <vector>

#include "nlpd/bernstein.hpp"
#include "nlpd/laplace.hpp"
#include "nlpd/subordination.hpp"

namespace nlpd {

/// Evaluates the relaxation function E(t; -lambda) = E[exp(-lambda L(t))].
class RelaxationEvaluator {
 public:
  enum class Method { MittagLeffler, LaplaceInversion };

  explicit RelaxationEvaluator(Bernstein phi, laplace::Options options = {});

  const Bernstein& bernstein() const { return phi_; }
  Method method() const { return method_; }

  /// E(t; -lambda), t >= 0, lambda >= 0.
  double operator()(double t, double lambda) const;

  /// h_k(t) = inverse Laplace transform of Phi(z)^k / z. These are the
  /// coefficients of the large-lambda expansion
  ///   E(t; -lambda) ~ h_1/lambda - h_2/lambda^2 + h_3/lambda^3 - ...
  /// and h_1 is the Levy tail.
  double asymptotic_coefficient(int k, double t) const;

  /// E(t; -lambda) - h_1/lambda + h_2/lambda^2, computed without cancellation
  /// for the numeric path (inverts Phi^3 / (z lambda^2 (Phi + lambda))).
  double remainder2(double t, double lambda) const;

 private:
  Bernstein phi_;
  laplace::Options options_;
  Method method_;
};

/// A function sampled on increasing nodes starting at 0, treated as
/// piecewise linear between samples.
struct SampledFunction {
  std::vector<double> t;
  std::vector<double> u;
};

/// Nodes on [0, T] graded toward 0 as T (k/n)^q.
std::vector<double> graded_grid(double T, int n, double q = 3.0);

/// Non-local derivative int_0^t u'(tau) nu-bar(t - tau) d tau of a sampled
/// function, by product integration against the exact integrated tail.
/// Throws ResolutionError with fewer than 8 samples in [0, t].
double nonlocal_derivative(const Bernstein& phi, const SampledFunction& u, double t);

/// Stationary correlation Corr(X(t), X(s)) for t >= s >= 0 of a time-changed
/// process whose first nonzero eigenvalue is lambda1:
///   E(t; -l1) + l1 int_0^s E(t - tau; -l1) dU(tau).
double stationary_correlation(const RelaxationEvaluator& relax, const RenewalFunction& renewal,
                              double lambda1, double t, double s);

}  // namespace nlpd
