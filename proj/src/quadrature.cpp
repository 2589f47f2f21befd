#include "nlpd/quadrature.hpp"

#include <cmath>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

namespace nlpd::quad {

Result adaptive(const Integrand& f, double a, double b, double rel_tol, unsigned max_depth) {
  Result r;
  if (a == b) return r;
  r.value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, max_depth,
                                                                           rel_tol, &r.error);
  return r;
}

Result endpoint_singular(const Integrand& f, double a, double b, double rel_tol) {
  Result r;
  if (a == b) return r;
  // Construction of the abscissa tables is the expensive part; keep one per thread.
  thread_local boost::math::quadrature::tanh_sinh<double> ts;
  double l1 = 0.0;
  r.value = ts.integrate(f, a, b, rel_tol, &r.error, &l1);
  return r;
}

Result half_line(const Integrand& f, double a, double rel_tol) {
  Result r;
  thread_local boost::math::quadrature::exp_sinh<double> es;
  double l1 = 0.0;
  r.value = es.integrate([&](double x) { return f(a + x); }, 0.0,
                         std::numeric_limits<double>::infinity(), rel_tol, &r.error, &l1);
  return r;
}

Result positive_axis(const Integrand& f, double split, double rel_tol) {
  const Result lo = endpoint_singular(f, 0.0, split, rel_tol);
  const Result hi = half_line(f, split, rel_tol);
  return {lo.value + hi.value, lo.error + hi.error};
}

}  // namespace nlpd::quad
