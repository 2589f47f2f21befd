#include "nlpd/spectral.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <mutex>
#include <numbers>
#include <string>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "nlpd/errors.hpp"
#include "nlpd/quadrature.hpp"

namespace nlpd {

// ---------------------------------------------------------------------------
// Green kernels
//
// Write M for the stationary CDF, Mc = 1 - M, and s = 1/(m D) for the scale
// density. With
//   A(x) = int_l^x M^2 s,   B(x) = int^x M Mc s,   C(x) = int_x^L Mc^2 s,
// the kernel for lo = min(x, y), hi = max(x, y) is
//   G1(x, y) = A(lo) + B(lo) - B(hi) + C(hi).
// It solves G G1(., y) = 1 away from y, has the unit jump of the flux at y and
// integrates to zero against m, which characterises the pseudo-inverse.
// Everything is tabulated on a uniform grid in a variable u that stretches the
// state space (sinh, exp or tanh) and interpolated by cubic Hermite with the
// exact derivatives.
// ---------------------------------------------------------------------------

namespace {

constexpr int kGL = 7;

const std::array<double, kGL>& gl_nodes() {
  static const auto nodes = [] {
    std::array<double, kGL> out{};
    const auto& a = boost::math::quadrature::gauss<double, kGL>::abscissa();
    int k = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      out[k++] = a[i];
      if (a[i] != 0.0) out[k++] = -a[i];
    }
    return out;
  }();
  return nodes;
}

const std::array<double, kGL>& gl_weights() {
  static const auto weights = [] {
    std::array<double, kGL> out{};
    const auto& a = boost::math::quadrature::gauss<double, kGL>::abscissa();
    const auto& w = boost::math::quadrature::gauss<double, kGL>::weights();
    int k = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      out[k++] = w[i];
      if (a[i] != 0.0) out[k++] = w[i];
    }
    return out;
  }();
  return weights;
}

double hermite(double y0, double d0, double y1, double d1, double h, double s) {
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * d0 + (-2 * s3 + 3 * s2) * y1 +
         (s3 - s2) * h * d1;
}

}  // namespace

struct GreenFunction::Impl {
  enum class Map { Line, HalfLine, Interval };
  explicit Impl(PearsonFamily f) : family(std::move(f)) {}
  PearsonFamily family;
  Map map = Map::Line;
  double c = 0.0, s = 1.0;
  double u0 = 0.0, du = 0.01;
  int cells = 0;
  std::vector<double> M, Mc, dM;        // CDF, complement and dM/du at the nodes
  std::vector<double> A, B, C, dA, dB, dC;

  double x_of(double u) const {
    switch (map) {
      case Map::Line: return c + s * std::sinh(u);
      case Map::HalfLine: return s * std::exp(u);
      default: return std::tanh(u);
    }
  }
  double jac(double u) const {
    switch (map) {
      case Map::Line: return s * std::cosh(u);
      case Map::HalfLine: return s * std::exp(u);
      default: {
        const double t = std::tanh(u);
        return 1.0 - t * t;
      }
    }
  }
  double u_of(double x) const {
    switch (map) {
      case Map::Line: return std::asinh((x - c) / s);
      case Map::HalfLine: return std::log(x / s);
      default: return std::atanh(x);
    }
  }

  double lo() const { return x_of(u0); }
  double hi() const { return x_of(u0 + cells * du); }

  // Cell index and fractional position of u.
  void locate(double u, int& i, double& frac) const {
    const double r = (u - u0) / du;
    i = std::clamp(int(std::floor(r)), 0, cells - 1);
    frac = r - i;
  }

  double interp(const std::vector<double>& y, const std::vector<double>& d, int i, double frac) const {
    return hermite(y[i], d[i], y[i + 1], d[i + 1], du, frac);
  }

  // Scale-density integrands a = M^2 s, b = M Mc s, c = Mc^2 s.
  void integrands(double x, double Mv, double Mcv, double& a, double& b, double& cc) const {
    const double lmd = family.log_stationary_density(x) + std::log(family.diffusion(x));
    a = Mv > 0.0 ? std::exp(2.0 * std::log(Mv) - lmd) : 0.0;
    cc = Mcv > 0.0 ? std::exp(2.0 * std::log(Mcv) - lmd) : 0.0;
    b = (Mv > 0.0 && Mcv > 0.0) ? std::exp(std::log(Mv) + std::log(Mcv) - lmd) : 0.0;
  }

  void cdf_at(double u, double& Mv, double& Mcv) const {
    int i;
    double frac;
    locate(u, i, frac);
    Mv = std::max(interp(M, dM, i, frac), 0.0);
    Mcv = std::max(hermite(Mc[i], -dM[i], Mc[i + 1], -dM[i + 1], du, frac), 0.0);
  }

  void build();
  double g1(double x, double y) const;
};

void GreenFunction::Impl::build() {
  double ua, ub;
  switch (family.kind()) {
    case FamilyKind::OU:
    case FamilyKind::Student:
      map = Map::Line;
      c = family.center();
      s = family.scale();
      ua = -std::asinh(1e8);
      ub = std::asinh(1e8);
      break;
    case FamilyKind::Jacobi:
      map = Map::Interval;
      ua = -17.0;
      ub = 17.0;
      break;
    default:
      map = Map::HalfLine;
      s = family.scale();
      ua = std::log(1e-12);
      ub = std::log(1e10);
      break;
  }
  // Drop the far tails where m underflows the scale density.
  const int n_all = int(std::ceil((ub - ua) / du));
  int first = -1, last = -1;
  for (int i = 0; i <= n_all; ++i) {
    const double x = x_of(ua + i * du);
    if (!family.contains(x)) continue;
    if (family.log_stationary_density(x) > -650.0) {
      if (first < 0) first = i;
      last = i;
    }
  }
  if (first < 0 || last - first < 16) throw NumericFailure("GreenFunction: degenerate stationary density");
  u0 = ua + first * du;
  cells = last - first;

  const auto& gx = gl_nodes();
  const auto& gw = gl_weights();
  auto cell_integral = [&](int i, const std::function<double(double)>& f) {
    const double mid = u0 + (i + 0.5) * du, half = 0.5 * du;
    double acc = 0.0;
    for (int k = 0; k < kGL; ++k) acc += gw[k] * f(mid + half * gx[k]);
    return acc * half;
  };
  auto mass_density = [&](double u) {
    const double x = x_of(u);
    return family.stationary_density(x) * jac(u);
  };

  const double x_lo = lo(), x_hi = hi();
  auto m = [&](double x) { return family.stationary_density(x); };
  double left = 0.0, right = 0.0;
  if (std::isfinite(family.lower()))
    left = quad::endpoint_singular(m, family.lower(), x_lo, 1e-12).value;
  else
    left = quad::half_line([&](double v) { return m(x_lo - v); }, 0.0, 1e-12).value;
  if (std::isfinite(family.upper()))
    right = quad::endpoint_singular(m, x_hi, family.upper(), 1e-12).value;
  else
    right = quad::half_line(m, x_hi, 1e-12).value;

  std::vector<double> mass(cells);
  double total = left + right;
  for (int i = 0; i < cells; ++i) total += mass[i] = cell_integral(i, mass_density);
  M.assign(cells + 1, 0.0);
  Mc.assign(cells + 1, 0.0);
  dM.assign(cells + 1, 0.0);
  M[0] = left / total;
  for (int i = 0; i < cells; ++i) M[i + 1] = M[i] + mass[i] / total;
  Mc[cells] = right / total;
  for (int i = cells - 1; i >= 0; --i) Mc[i] = Mc[i + 1] + mass[i] / total;
  for (int i = 0; i <= cells; ++i) dM[i] = mass_density(u0 + i * du) / total;

  A.assign(cells + 1, 0.0);
  B.assign(cells + 1, 0.0);
  C.assign(cells + 1, 0.0);
  dA.assign(cells + 1, 0.0);
  dB.assign(cells + 1, 0.0);
  dC.assign(cells + 1, 0.0);
  for (int i = 0; i <= cells; ++i) {
    const double u = u0 + i * du;
    double a, b, cc;
    integrands(x_of(u), M[i], Mc[i], a, b, cc);
    dA[i] = a * jac(u);
    dB[i] = b * jac(u);
    dC[i] = -cc * jac(u);
  }
  std::vector<double> ia(cells), ib(cells), ic(cells);
  for (int i = 0; i < cells; ++i) {
    double sa = 0.0, sb = 0.0, sc = 0.0;
    const double mid = u0 + (i + 0.5) * du, half = 0.5 * du;
    for (int k = 0; k < kGL; ++k) {
      const double u = mid + half * gx[k];
      double Mv, Mcv, a, b, cc;
      cdf_at(u, Mv, Mcv);
      integrands(x_of(u), Mv, Mcv, a, b, cc);
      const double w = gw[k] * jac(u) * half;
      sa += w * a;
      sb += w * b;
      sc += w * cc;
    }
    ia[i] = sa;
    ib[i] = sb;
    ic[i] = sc;
  }
  for (int i = 0; i < cells; ++i) {
    A[i + 1] = A[i] + ia[i];
    B[i + 1] = B[i] + ib[i];
  }
  for (int i = cells - 1; i >= 0; --i) C[i] = C[i + 1] + ic[i];
}

double GreenFunction::Impl::g1(double x, double y) const {
  const double lo_x = std::min(x, y), hi_x = std::max(x, y);
  int i, j;
  double fi, fj;
  locate(u_of(lo_x), i, fi);
  locate(u_of(hi_x), j, fj);
  return interp(A, dA, i, fi) + interp(B, dB, i, fi) - interp(B, dB, j, fj) + interp(C, dC, j, fj);
}

GreenFunction::GreenFunction(const PearsonFamily& family) {
  auto impl = std::make_shared<Impl>(family);
  impl->build();
  impl_ = std::move(impl);
}

double GreenFunction::lower() const { return impl_->lo(); }
double GreenFunction::upper() const { return impl_->hi(); }

// Points beyond the tables lie in the outer 1e-280 or so of the stationary law,
// where the kernels are flat to working precision; they are clamped.
namespace {
double clamp_green_point(const PearsonFamily& f, double lo, double hi, double x) {
  if (!f.contains(x)) throw DomainError("GreenFunction: x = " + std::to_string(x) + " is outside the state space");
  return std::clamp(x, lo, hi);
}
}  // namespace

double GreenFunction::g1(double x, double y) const {
  const Impl& I = *impl_;
  return I.g1(clamp_green_point(I.family, I.lo(), I.hi(), x), clamp_green_point(I.family, I.lo(), I.hi(), y));
}

double GreenFunction::g2(double x, double y) const {
  const Impl& I = *impl_;
  x = clamp_green_point(I.family, I.lo(), I.hi(), x);
  y = clamp_green_point(I.family, I.lo(), I.hi(), y);
  auto f = [&](double u) {
    const double z = I.x_of(u);
    return I.g1(x, z) * I.g1(z, y) * I.family.stationary_density(z) * I.jac(u);
  };
  const double ua = I.u0, ub = I.u0 + I.cells * I.du;
  const double p = I.u_of(std::min(x, y)), q = I.u_of(std::max(x, y));
  return quad::adaptive(f, ua, p, 1e-11).value + quad::adaptive(f, p, q, 1e-11).value +
         quad::adaptive(f, q, ub, 1e-11).value;
}

// ---------------------------------------------------------------------------
// Spectral expansion
// ---------------------------------------------------------------------------

namespace {

// Coefficient of Q_n(x) Q_n(x0) m(x) in the expansion, as a function of the
// eigenvalue. In the accelerated form the 1/lambda and 1/lambda^2 parts of the
// relaxation function have been moved into the Green kernels.
struct Kernel {
  std::function<double(double)> coefficient;
  bool accelerated = false;
  double h1 = 0.0, h2 = 0.0;
  double t = 0.0;
};

// Vector-valued adaptive Gauss-Kronrod 15 on [a, b].
class VectorGK {
 public:
  using Fn = std::function<void(double, std::vector<double>&)>;

  VectorGK(Fn f, std::vector<double> weights, double tol) : f_(std::move(f)), w_(std::move(weights)), tol_(tol) {}

  // Integral over [a, b]; returns the weighted error estimate in `err`.
  std::vector<double> integrate(double a, double b, double& err, int depth = 0) const {
    using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
    const auto& xk = GK::abscissa();
    const auto& wk = GK::weights();
    const auto& wg = boost::math::quadrature::gauss<double, 7>::weights();
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    const std::size_t n = w_.size();
    std::vector<double> kron(n, 0.0), gauss(n, 0.0), v(n);
    for (std::size_t k = 0; k < xk.size(); ++k) {
      for (int sgn : {1, -1}) {
        if (k == 0 && sgn < 0) continue;
        f_(mid + sgn * half * xk[k], v);
        for (std::size_t i = 0; i < n; ++i) {
          kron[i] += wk[k] * v[i];
          if (k % 2 == 0) gauss[i] += wg[k / 2] * v[i];
        }
      }
    }
    err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      kron[i] *= half;
      gauss[i] *= half;
      err = std::max(err, w_[i] * std::abs(kron[i] - gauss[i]));
    }
    if (err <= tol_ * (b - a) || depth >= 14) return kron;
    double el, er;
    auto left = integrate(a, mid, el, depth + 1);
    const auto right = integrate(mid, b, er, depth + 1);
    for (std::size_t i = 0; i < n; ++i) left[i] += right[i];
    err = el + er;
    return left;
  }

 private:
  Fn f_;
  std::vector<double> w_;
  double tol_;  // error allowed per unit length of u
};

}  // namespace

struct SpectralExpansion::Impl {
  explicit Impl(PearsonFamily f) : family(std::move(f)) {}
  PearsonFamily family;
  std::optional<Bernstein> phi;
  std::optional<RelaxationEvaluator> relax;
  SpectralOptions options;
  SpectralCategory category = SpectralCategory::I;
  int n_max = 0;
  int n_cap = 0;
  std::optional<PolynomialSystem> polys;
  std::optional<ContinuousSpectrum> continuous;
  mutable std::once_flag green_once;
  mutable std::unique_ptr<GreenFunction> green;

  const GreenFunction& green_fn() const {
    std::call_once(green_once, [&] { green = std::make_unique<GreenFunction>(family); });
    return *green;
  }

  void q_values(double x, std::span<double> out) const {
    if (category == SpectralCategory::I)
      classical_recurrence(family, x, out);
    else
      polys->values(x, out);
  }

  std::vector<DensityEstimate> evaluate(const Kernel& kernel, std::span<const double> xs, double x0) const;
  std::vector<DensityEstimate> evaluate_at(const Kernel& kernel, std::span<const double> xs, double x0,
                                           int N) const;
};

SpectralExpansion::SpectralExpansion(PearsonFamily family, std::optional<Bernstein> phi,
                                     SpectralOptions options) {
  auto impl = std::make_shared<Impl>(family);
  impl->phi = phi;
  if (phi) impl->relax.emplace(*phi);
  impl->options = options;
  impl->category = family.category();
  if (options.n_trunc < 0 || options.n_trunc_max < 0)
    throw ConfigError("spectral: n_trunc and n_trunc_max must be nonnegative");
  if (impl->category == SpectralCategory::I) {
    const int def = family.kind() == FamilyKind::Jacobi ? 40 : 60;
    impl->n_max = options.n_trunc > 0 ? options.n_trunc : def;
    impl->n_cap = options.n_trunc_max > 0 ? std::max(options.n_trunc_max, impl->n_max) : 16 * impl->n_max;
  } else {
    impl->n_max = family.last_square_integrable();
    if (options.n_trunc > 0) impl->n_max = std::min(impl->n_max, options.n_trunc);
    impl->polys.emplace(family, impl->n_max);
    if (impl->category == SpectralCategory::II) impl->continuous.emplace(family);
  }
  impl_ = std::move(impl);
}

const PearsonFamily& SpectralExpansion::family() const { return impl_->family; }
const std::optional<Bernstein>& SpectralExpansion::phi() const { return impl_->phi; }
int SpectralExpansion::truncation() const { return impl_->n_max; }

// Category I: the truncation starts at n_max and doubles while the tail bound
// fails, up to n_trunc_max.
std::vector<DensityEstimate> SpectralExpansion::Impl::evaluate(const Kernel& kernel, std::span<const double> xs,
                                                               double x0) const {
  if (!(kernel.t > 0.0)) throw DomainError("spectral: t must be positive");
  if (!family.contains(x0)) throw DomainError("spectral: x0 outside the state space");
  for (double x : xs)
    if (!family.contains(x)) throw DomainError("spectral: x outside the state space");
  int N = n_max;
  while (true) {
    try {
      return evaluate_at(kernel, xs, x0, N);
    } catch (const TruncationError&) {
      if (category != SpectralCategory::I || 2 * N > n_cap) throw;
      N *= 2;
    }
  }
}

std::vector<DensityEstimate> SpectralExpansion::Impl::evaluate_at(const Kernel& kernel, std::span<const double> xs,
                                                                  double x0, int N) const {
  std::vector<double> coef(N + 1);
  coef[0] = 1.0;
  for (int n = 1; n <= N; ++n) coef[n] = kernel.coefficient(family.eigenvalue(n));
  std::vector<double> q0(N + 1), q(N + 1);
  q_values(x0, q0);

  const std::size_t nx = xs.size();
  std::vector<double> ratio(nx, 0.0), bound(nx, 0.0), m(nx);
  for (std::size_t i = 0; i < nx; ++i) {
    m[i] = family.stationary_density(xs[i]);
    q_values(xs[i], q);
    double acc = 0.0;
    for (int n = 0; n <= N; ++n) acc += coef[n] * q[n] * q0[n];
    ratio[i] = acc;
    if (category != SpectralCategory::I) continue;
    // Tail bound from the envelope of the last half of the terms.
    double env = 0.0;
    if (kernel.accelerated) {
      // Coefficients decay like lambda_n^{-3}, at least n^{-3}.
      for (int n = N / 2; n <= N; ++n) env = std::max(env, std::abs(coef[n] * q[n] * q0[n]) * std::pow(n, 3.0));
      bound[i] = env / (2.0 * N * double(N));
    } else {
      for (int n = N / 2; n <= N; ++n) env = std::max(env, std::abs(q[n] * q0[n]));
      const double l1 = family.eigenvalue(N + 1), l2 = family.eigenvalue(N + 2);
      bound[i] = env * std::exp(-l1 * kernel.t) / -std::expm1(-(l2 - l1) * kernel.t);
    }
    bound[i] *= m[i];
    if (!(bound[i] <= options.truncation_tol))
      throw TruncationError("spectral: truncation bound " + std::to_string(bound[i]) + " at x = " +
                            std::to_string(xs[i]) + " exceeds " + std::to_string(options.truncation_tol) +
                            " with N = " + std::to_string(N) + "; increase n_trunc or t");
  }

  if (category == SpectralCategory::II) {
    // (1/pi) int_Lambda^inf coefficient(lambda) a(lambda) f(x, lambda) f(x0, lambda) d lambda
    // with lambda = Lambda + u^2, on doubling segments in u.
    const double cut = continuous->cutoff();
    std::vector<double> pts(xs.begin(), xs.end());
    pts.push_back(x0);
    auto integrand = [&](double u, std::vector<double>& out) {
      const double lam = cut + u * u;
      const double c = kernel.coefficient(lam);
      if (c == 0.0) {
        std::fill(out.begin(), out.end(), 0.0);
        return;
      }
      // a(lambda) f(x) f(x0) in logs: a overflows where f underflows.
      const double lw = continuous->log_weight(lam);
      const auto f = continuous->eigenfunction(pts, lam);
      const double pre = 2.0 * u / std::numbers::pi * c;
      for (std::size_t i = 0; i < nx; ++i) {
        const double g = f[i] * f[nx];
        out[i] = g == 0.0 ? 0.0 : pre * std::copysign(std::exp(lw + std::log(std::abs(g))), g);
      }
    };
    VectorGK gk(integrand, m, 0.02 * options.continuous_tol);
    double a = 0.0, b = 0.5, err_total = 0.0;
    std::vector<double> cont(nx, 0.0);
    while (true) {
      double err = 0.0;
      const auto seg = gk.integrate(a, b, err);
      double seg_mag = 0.0;
      for (std::size_t i = 0; i < nx; ++i) {
        cont[i] += seg[i];
        seg_mag = std::max(seg_mag, m[i] * std::abs(seg[i]));
      }
      err_total += err;
      if (seg_mag < 0.1 * options.continuous_tol && b >= 4.0) {
        // The integrand decays at least like u^{-3} here, so the rest of the
        // tail is below this last segment.
        err_total += seg_mag;
        break;
      }
      if (b > 1e4)
        throw TruncationError("spectral: continuous part did not decay by lambda = " +
                              std::to_string(cut + b * b));
      a = b;
      b *= 2.0;
    }
    for (std::size_t i = 0; i < nx; ++i) {
      ratio[i] += cont[i];
      bound[i] += err_total;
    }
    if (!(err_total <= options.truncation_tol))
      throw TruncationError("spectral: continuous-part error " + std::to_string(err_total) + " exceeds " +
                            std::to_string(options.truncation_tol));
  }

  if (kernel.accelerated) {
    const GreenFunction& g = green_fn();
    for (std::size_t i = 0; i < nx; ++i) {
      ratio[i] += kernel.h1 * g.g1(xs[i], x0);
      if (kernel.h2 != 0.0) ratio[i] -= kernel.h2 * g.g2(xs[i], x0);
    }
  }

  std::vector<DensityEstimate> out(nx);
  for (std::size_t i = 0; i < nx; ++i) {
    DensityEstimate& d = out[i];
    d.raw = m[i] * ratio[i];
    d.error_bound = bound[i];
    d.continuous_part_omitted = category == SpectralCategory::III;
    if (d.raw < -std::max(1e-6, 10.0 * d.error_bound))
      throw NumericFailure("spectral: density " + std::to_string(d.raw) + " at x = " + std::to_string(xs[i]) +
                           " is negative beyond the tolerance");
    d.clamped = d.raw < 0.0;
    d.value = std::max(d.raw, 0.0);
  }
  return out;
}

std::vector<DensityEstimate> SpectralExpansion::transition_density(double t, std::span<const double> xs,
                                                                   double x0) const {
  Kernel k;
  k.t = t;
  k.coefficient = [t](double lam) { return std::exp(-lam * t); };
  return impl_->evaluate(k, xs, x0);
}

DensityEstimate SpectralExpansion::transition_density(double t, double x, double x0) const {
  const double xs[1] = {x};
  return transition_density(t, std::span<const double>(xs, 1), x0)[0];
}

std::vector<DensityEstimate> SpectralExpansion::nonlocal_transition_density(double t, std::span<const double> xs,
                                                                            double x0) const {
  if (!impl_->relax) throw ConfigError("spectral: a non-local density needs a Bernstein function");
  if (!(t > 0.0)) throw DomainError("spectral: t must be positive");
  const RelaxationEvaluator& r = *impl_->relax;
  Kernel k;
  k.t = t;
  if (impl_->category == SpectralCategory::III) {
    // Without the continuous part the Green kernels cannot be split off.
    k.coefficient = [&r, t](double lam) { return r(t, lam); };
  } else {
    k.accelerated = true;
    k.h1 = r.asymptotic_coefficient(1, t);
    k.h2 = r.asymptotic_coefficient(2, t);
    k.coefficient = [&r, t](double lam) { return r.remainder2(t, lam); };
  }
  return impl_->evaluate(k, xs, x0);
}

DensityEstimate SpectralExpansion::nonlocal_transition_density(double t, double x, double x0) const {
  const double xs[1] = {x};
  return nonlocal_transition_density(t, std::span<const double>(xs, 1), x0)[0];
}

}  // namespace nlpd
