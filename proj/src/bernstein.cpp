#include "nlpd/bernstein.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "pchip.hpp"
#include <boost/math/special_functions/gamma.hpp>

#include "nlpd/errors.hpp"
#include "nlpd/quadrature.hpp"
#include "nlpd/special.hpp"

namespace nlpd {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kCustomTol = 1e-8;

// Monotone interpolant of log g(log t) on a fixed log grid; falls back to the
// exact evaluator outside the grid.
class LogGridCache {
 public:
  LogGridCache(const std::function<double(double)>& exact, double t_lo, double t_hi, int per_decade)
      : exact_(exact), lo_(t_lo), hi_(t_hi) {
    const int n = static_cast<int>(std::ceil(std::log10(t_hi / t_lo) * per_decade)) + 1;
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = std::log(t_lo) + (std::log(t_hi) - std::log(t_lo)) * i / (n - 1);
      y[i] = std::log(exact(std::exp(x[i])));
    }
    interp_ = std::make_shared<boost::math::interpolators::pchip<std::vector<double>>>(
        std::move(x), std::move(y));
  }
  double operator()(double t) const {
    if (t < lo_ || t > hi_) return exact_(t);
    return std::exp((*interp_)(std::log(t)));
  }

 private:
  std::function<double(double)> exact_;
  double lo_, hi_;
  std::shared_ptr<boost::math::interpolators::pchip<std::vector<double>>> interp_;
};

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw DomainError("Bernstein: alpha must lie in (0,1), got " + std::to_string(alpha));
}

// Gamma(-a, x) for x > 0 and a in (0,1).
double upper_gamma_neg(double a, double x) {
  if (x > 30.0) {
    // Asymptotic expansion x^{-a-1} e^{-x} sum_k (-1)^k (a+1)_k / x^k.
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 30; ++k) {
      term *= -(a + k) / x;
      sum += term;
      if (std::abs(term) < 1e-17) break;
    }
    return std::pow(x, -a - 1.0) * std::exp(-x) * sum;
  }
  return (std::pow(x, -a) * std::exp(-x) - boost::math::tgamma(1.0 - a, x)) / a;
}

// Quadrature nodes can land where a user density overflows even though the
// integrand itself is integrable; such points carry no mass.
double finite_or_zero(double v) { return std::isfinite(v) ? v : 0.0; }

}  // namespace

struct Bernstein::Impl {
  BernsteinKind kind = BernsteinKind::Stable;
  double alpha = kNaN;
  double theta = kNaN;
  Density custom_density;
  Density custom_tail;
  Density custom_integrated;
  std::optional<LogGridCache> tail_cache;
  std::optional<LogGridCache> integrated_cache;

  // Geometric stable: spectral representation through the density of the
  // Stieltjes measure, K(r) dr with r = v^{1/alpha}.
  double geometric_weight(double v) const {
    if (v > 1e150) return std::sin(alpha * kPi) / kPi / v / v;
    return std::sin(alpha * kPi) / kPi / (v * v + 2.0 * v * std::cos(alpha * kPi) + 1.0);
  }
  double geometric_tail_exact(double t) const {
    auto f = [&](double v) {
      if (v <= 0.0) return 0.0;
      const double log_x = std::log(t) + std::log(v) / alpha;
      if (log_x > std::log(700.0)) return 0.0;
      // E_1(x) = -gamma - log x + O(x) once x underflows.
      const double e1 = log_x < -600.0 ? -std::numbers::egamma - log_x
                                       : special::expint_e1(std::exp(log_x));
      return e1 * geometric_weight(v);
    };
    return quad::positive_axis(f, 1.0, 1e-12).value;
  }
  double geometric_integrated_exact(double t) const {
    auto f = [&](double v) {
      if (v <= 0.0) return t * geometric_weight(0.0);
      const double r = std::pow(v, 1.0 / alpha);
      if (r < 1e-300) return t * geometric_weight(v);
      if (!std::isfinite(r)) return 0.0;
      return -std::expm1(-t * r) / r * geometric_weight(v);
    };
    return t * geometric_tail_exact(t) + quad::positive_axis(f, 1.0, 1e-12).value;
  }
};

std::string to_string(Dependence d) {
  switch (d) {
    case Dependence::LongRange: return "long-range";
    case Dependence::ShortRange: return "short-range";
    default: return "unknown";
  }
}

Bernstein::Bernstein(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

Bernstein Bernstein::stable(double alpha) {
  check_alpha(alpha);
  auto p = std::make_shared<Impl>();
  p->kind = BernsteinKind::Stable;
  p->alpha = alpha;
  return Bernstein(p);
}

Bernstein Bernstein::tempered_stable(double alpha, double theta) {
  check_alpha(alpha);
  if (!(theta > 0.0)) throw DomainError("Bernstein: tempering rate theta must be positive");
  auto p = std::make_shared<Impl>();
  p->kind = BernsteinKind::TemperedStable;
  p->alpha = alpha;
  p->theta = theta;
  return Bernstein(p);
}

Bernstein Bernstein::geometric_stable(double alpha) {
  check_alpha(alpha);
  auto p = std::make_shared<Impl>();
  p->kind = BernsteinKind::GeometricStable;
  p->alpha = alpha;
  const Impl* raw = p.get();
  p->tail_cache.emplace([raw](double t) { return raw->geometric_tail_exact(t); }, 1e-8, 1e6, 40);
  p->integrated_cache.emplace([raw](double t) { return raw->geometric_integrated_exact(t); },
                              1e-8, 1e6, 40);
  return Bernstein(p);
}

Bernstein Bernstein::gamma() {
  auto p = std::make_shared<Impl>();
  p->kind = BernsteinKind::Gamma;
  return Bernstein(p);
}

Bernstein Bernstein::custom(Density levy_density, Density tail, Density integrated_tail) {
  if (!levy_density) throw DomainError("Bernstein: custom kind requires a Levy density");
  auto p = std::make_shared<Impl>();
  p->kind = BernsteinKind::Custom;
  p->custom_density = std::move(levy_density);
  p->custom_tail = std::move(tail);
  p->custom_integrated = std::move(integrated_tail);
  return Bernstein(p);
}

BernsteinKind Bernstein::kind() const { return impl_->kind; }
double Bernstein::alpha() const { return impl_->alpha; }
double Bernstein::theta() const { return impl_->theta; }

std::string Bernstein::name() const {
  switch (impl_->kind) {
    case BernsteinKind::Stable: return "stable";
    case BernsteinKind::TemperedStable: return "tempered_stable";
    case BernsteinKind::GeometricStable: return "geometric_stable";
    case BernsteinKind::Gamma: return "gamma";
    case BernsteinKind::Custom: return "custom";
  }
  return "unknown";
}

double Bernstein::phi(double lambda) const {
  if (!(lambda >= 0.0)) throw DomainError("phi: lambda must be nonnegative");
  if (lambda == 0.0) return 0.0;
  const double a = impl_->alpha;
  switch (impl_->kind) {
    case BernsteinKind::Stable: return std::pow(lambda, a);
    case BernsteinKind::TemperedStable: {
      const double th = impl_->theta;
      // (lambda+theta)^a - theta^a without cancellation for small lambda.
      return std::pow(th, a) * std::expm1(a * std::log1p(lambda / th));
    }
    case BernsteinKind::GeometricStable: return std::log1p(std::pow(lambda, a));
    case BernsteinKind::Gamma: return std::log1p(lambda);
    case BernsteinKind::Custom: {
      auto f = [&](double t) { return finite_or_zero(-std::expm1(-lambda * t) * impl_->custom_density(t)); };
      return quad::positive_axis(f, 1.0, kCustomTol).value;
    }
  }
  return 0.0;
}

std::complex<double> Bernstein::phi(std::complex<double> z) const {
  using cplx = std::complex<double>;
  const double a = impl_->alpha;
  switch (impl_->kind) {
    case BernsteinKind::Stable: return std::pow(z, a);
    case BernsteinKind::TemperedStable:
      return std::pow(z + impl_->theta, a) - std::pow(impl_->theta, a);
    case BernsteinKind::GeometricStable: return std::log(1.0 + std::pow(z, a));
    case BernsteinKind::Gamma: return std::log(1.0 + z);
    case BernsteinKind::Custom: {
      auto re = [&](double t) {
        return finite_or_zero((1.0 - std::exp(-z.real() * t) * std::cos(z.imag() * t)) *
                              impl_->custom_density(t));
      };
      auto im = [&](double t) {
        return finite_or_zero(std::exp(-z.real() * t) * std::sin(z.imag() * t) *
                              impl_->custom_density(t));
      };
      return cplx(quad::positive_axis(re, 1.0, kCustomTol).value,
                  quad::positive_axis(im, 1.0, kCustomTol).value);
    }
  }
  return 0.0;
}

double Bernstein::levy_density(double t) const {
  if (!(t > 0.0)) throw DomainError("levy_density: t must be positive");
  const double a = impl_->alpha;
  switch (impl_->kind) {
    case BernsteinKind::Stable: return a * std::pow(t, -1.0 - a) / std::tgamma(1.0 - a);
    case BernsteinKind::TemperedStable:
      return a * std::pow(t, -1.0 - a) * std::exp(-impl_->theta * t) / std::tgamma(1.0 - a);
    case BernsteinKind::GeometricStable:
      return a * special::mittag_leffler_neg(a, std::pow(t, a)) / t;
    case BernsteinKind::Gamma: return std::exp(-t) / t;
    case BernsteinKind::Custom: return impl_->custom_density(t);
  }
  return 0.0;
}

double Bernstein::levy_tail(double t) const {
  if (!(t > 0.0)) throw DomainError("levy_tail: t must be positive");
  const double a = impl_->alpha;
  switch (impl_->kind) {
    case BernsteinKind::Stable: return std::pow(t, -a) / std::tgamma(1.0 - a);
    case BernsteinKind::TemperedStable: {
      const double th = impl_->theta;
      return a * std::pow(th, a) * upper_gamma_neg(a, th * t) / std::tgamma(1.0 - a);
    }
    case BernsteinKind::GeometricStable: return (*impl_->tail_cache)(t);
    case BernsteinKind::Gamma: return special::expint_e1(t);
    case BernsteinKind::Custom: {
      if (impl_->custom_tail) return impl_->custom_tail(t);
      return quad::half_line(impl_->custom_density, t, kCustomTol).value;
    }
  }
  return 0.0;
}

double Bernstein::integrated_tail(double t) const {
  if (!(t >= 0.0)) throw DomainError("integrated_tail: t must be nonnegative");
  if (t == 0.0) return 0.0;
  const double a = impl_->alpha;
  switch (impl_->kind) {
    case BernsteinKind::Stable: return std::pow(t, 1.0 - a) / std::tgamma(2.0 - a);
    case BernsteinKind::TemperedStable: {
      const double th = impl_->theta;
      return t * levy_tail(t) +
             a * std::pow(th, a - 1.0) * boost::math::tgamma_lower(1.0 - a, th * t) /
                 std::tgamma(1.0 - a);
    }
    case BernsteinKind::GeometricStable: return (*impl_->integrated_cache)(t);
    case BernsteinKind::Gamma: return t * special::expint_e1(t) - std::expm1(-t);
    case BernsteinKind::Custom: {
      if (impl_->custom_integrated) return impl_->custom_integrated(t);
      auto f = [&](double s) { return s > 0.0 ? finite_or_zero(s * impl_->custom_density(s)) : 0.0; };
      return t * levy_tail(t) + quad::endpoint_singular(f, 0.0, t, kCustomTol).value;
    }
  }
  return 0.0;
}

RegularVariation Bernstein::regular_variation_index() const {
  using T = RegularVariation::Type;
  switch (impl_->kind) {
    case BernsteinKind::Stable:
    case BernsteinKind::GeometricStable: return {T::Index, impl_->alpha};
    case BernsteinKind::TemperedStable:
      return {T::LinearLimit, impl_->alpha * std::pow(impl_->theta, impl_->alpha - 1.0)};
    case BernsteinKind::Gamma: return {T::LinearLimit, 1.0};
    case BernsteinKind::Custom: return {T::Unknown, 0.0};
  }
  return {};
}

Dependence Bernstein::classify_dependence() const {
  switch (regular_variation_index().type) {
    case RegularVariation::Type::Index: return Dependence::LongRange;
    case RegularVariation::Type::LinearLimit: return Dependence::ShortRange;
    default: return Dependence::Unknown;
  }
}

double Bernstein::analytic_sector() const {
  switch (impl_->kind) {
    case BernsteinKind::Stable:
    case BernsteinKind::TemperedStable:
    case BernsteinKind::GeometricStable:
      return std::min(1.2, kPi / (2.0 * impl_->alpha) - kPi / 2.0 - 0.05);
    case BernsteinKind::Gamma: return 1.2;
    case BernsteinKind::Custom: return 0.5;
  }
  return 0.5;
}

}  // namespace nlpd

namespace nlpd {

namespace {

double phi_number(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number())
    throw ConfigError(std::string("phi: key '") + key + "' must be present and numeric");
  return j.at(key).get<double>();
}

void phi_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ConfigError("phi: unknown key '" + key + "'");
  }
}

}  // namespace

Bernstein Bernstein::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string())
    throw ConfigError("phi: expected an object with a string 'kind'");
  const std::string kind = j.at("kind").get<std::string>();
  try {
    if (kind == "stable") {
      phi_keys(j, {"kind", "alpha"});
      return stable(phi_number(j, "alpha"));
    }
    if (kind == "tempered_stable") {
      phi_keys(j, {"kind", "alpha", "theta"});
      return tempered_stable(phi_number(j, "alpha"), phi_number(j, "theta"));
    }
    if (kind == "geometric_stable") {
      phi_keys(j, {"kind", "alpha"});
      return geometric_stable(phi_number(j, "alpha"));
    }
    if (kind == "gamma") {
      phi_keys(j, {"kind"});
      return gamma();
    }
  } catch (const DomainError& e) {
    throw ConfigError(std::string("phi: ") + e.what());
  }
  throw ConfigError("phi: unknown kind '" + kind + "' (custom Levy densities are available from C++ only)");
}

nlohmann::json Bernstein::to_json() const {
  switch (kind()) {
    case BernsteinKind::Stable: return {{"kind", "stable"}, {"alpha", alpha()}};
    case BernsteinKind::TemperedStable: return {{"kind", "tempered_stable"}, {"alpha", alpha()}, {"theta", theta()}};
    case BernsteinKind::GeometricStable: return {{"kind", "geometric_stable"}, {"alpha", alpha()}};
    case BernsteinKind::Gamma: return {{"kind", "gamma"}};
    case BernsteinKind::Custom: break;
  }
  throw UnsupportedError("phi: a custom Bernstein function has no JSON descriptor");
}

}  // namespace nlpd
