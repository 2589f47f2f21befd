#pragma once

#include <functional>

#include "nlpd/bernstein.hpp"
#include "nlpd/laplace.hpp"

namespace nlpd {

struct Estimate {
  double value = 0.0;
  double error = 0.0;
};

struct SubordinationOptions {
  double tail_mass = 1e-8;      // truncation level for the s-integral
  double rel_tol = 1e-10;       // Gauss-Kronrod target
  double cross_check = 1e-4;    // inversion cross-check, relative to max(1,|v|)
  bool force_numeric = false;   // use Laplace inversion even for Stable
};

/// Density f(s; t) of the inverse subordinator L(t) in the variable s.
class InverseSubordinatorDensity {
 public:
  enum class Inversion { ClosedFormStable, NumericLaplace };

  explicit InverseSubordinatorDensity(Bernstein phi, SubordinationOptions options = {});

  const Bernstein& bernstein() const { return phi_; }
  Inversion inversion() const { return inversion_; }

  double operator()(double s, double t) const;

  /// Chernoff bound P(L(t) > s) <= inf_lambda exp(lambda t - s Phi(lambda)).
  double tail_bound(double s, double t) const;
  /// Smallest s with tail_bound(s, t) <= mass.
  double tail_cutoff(double t, double mass) const;

  /// int_0^inf kernel(s) f(s; t) ds. The error combines quadrature error and
  /// the truncated tail; a kernel that outgrows the tail raises NumericFailure.
  Estimate subordinate(const std::function<double(double)>& kernel, double t) const;

 private:
  Bernstein phi_;
  SubordinationOptions options_;
  Inversion inversion_;
};

/// U(t) = E[L(t)], tabulated eagerly on [0, t_max] and interpolated
/// monotonically; exact beyond the table.
class RenewalFunction {
 public:
  explicit RenewalFunction(Bernstein phi, double t_max = 100.0);
  double operator()(double t) const;
  const Bernstein& bernstein() const { return phi_; }

 private:
  double exact(double t) const;
  Bernstein phi_;
  double t_max_;
  std::function<double(double)> table_;  // empty when exact is cheap
};

}  // namespace nlpd
