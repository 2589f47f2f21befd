#pragma once

#include <functional>

namespace nlpd::quad {

using Integrand = std::function<double(double)>;

struct Result {
  double value = 0.0;
  double error = 0.0;
};

/// Adaptive Gauss-Kronrod (15-point pairs) on a finite interval.
Result adaptive(const Integrand& f, double a, double b, double rel_tol = 1e-10,
                unsigned max_depth = 15);

/// Tanh-sinh on a finite interval; tolerates integrable endpoint singularities.
Result endpoint_singular(const Integrand& f, double a, double b, double rel_tol = 1e-10);

/// Exp-sinh on [a, infinity) for decaying integrands.
Result half_line(const Integrand& f, double a, double rel_tol = 1e-10);

/// Integral over (0, infinity) split at `split`: tanh-sinh below, exp-sinh above.
Result positive_axis(const Integrand& f, double split = 1.0, double rel_tol = 1e-10);

}  // namespace nlpd::quad
