#include "nlpd/pearson.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <Eigen/Eigenvalues>

#include "nlpd/errors.hpp"
#include "nlpd/special.hpp"

namespace nlpd {

namespace {

using Ext = boost::multiprecision::cpp_bin_float_100;
using cplx = std::complex<double>;
constexpr double kPi = std::numbers::pi;

void require(bool ok, const std::string& family, const std::string& constraint) {
  if (!ok) throw DomainError(family + ": parameter constraint violated: " + constraint);
}

bool is_odd_integer(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < 1e-12 && std::fmod(std::abs(r), 2.0) == 1.0;
}

double finite_or_zero(double v) { return std::isfinite(v) ? v : 0.0; }

double json_number(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("family: missing key '") + key + "'");
  if (!j.at(key).is_number()) throw ConfigError(std::string("family: key '") + key + "' must be a number");
  return j.at(key).get<double>();
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ConfigError("family: unknown key '" + key + "'");
  }
}

// Five-point central differences with a step kept inside E.
struct Derivatives {
  double d0, d1, d2;
};

Derivatives differentiate(const std::function<double(double)>& g, double x, double h) {
  const double gp2 = g(x + 2 * h), gp1 = g(x + h), g0 = g(x), gm1 = g(x - h), gm2 = g(x - 2 * h);
  return {g0, (-gp2 + 8 * gp1 - 8 * gm1 + gm2) / (12 * h),
          (-gp2 + 16 * gp1 - 30 * g0 + 16 * gm1 - gm2) / (12 * h * h)};
}

}  // namespace

std::string to_string(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::OU: return "ou";
    case FamilyKind::CIR: return "cir";
    case FamilyKind::Jacobi: return "jacobi";
    case FamilyKind::FisherSnedecor: return "fs";
    case FamilyKind::ReciprocalGamma: return "rg";
    case FamilyKind::Student: return "student";
  }
  return "unknown";
}

std::string to_string(SpectralCategory category) {
  switch (category) {
    case SpectralCategory::I: return "I";
    case SpectralCategory::II: return "II";
    case SpectralCategory::III: return "III";
  }
  return "?";
}

PearsonFamily PearsonFamily::ou(double theta, double mu, double sigma) {
  require(theta > 0.0, "ou", "theta > 0");
  require(sigma > 0.0, "ou", "sigma > 0");
  require(std::isfinite(mu), "ou", "mu finite");
  PearsonFamily f;
  f.kind_ = FamilyKind::OU;
  f.params_ = OUParams{theta, mu, sigma};
  f.a_ = {theta * mu, -theta};
  f.d_ = {theta * sigma * sigma, 0.0, 0.0};
  f.lower_ = -INFINITY;
  f.upper_ = INFINITY;
  f.scale_ = sigma;
  f.log_norm_ = -std::log(sigma * std::sqrt(2.0 * kPi));
  return f;
}

PearsonFamily PearsonFamily::cir(double theta, double a, double b) {
  require(theta > 0.0, "cir", "theta > 0");
  require(a > 0.0, "cir", "a > 0");
  require(b > 0.0, "cir", "b > 0");
  PearsonFamily f;
  f.kind_ = FamilyKind::CIR;
  f.params_ = CIRParams{theta, a, b};
  f.a_ = {theta * b / a, -theta};
  f.d_ = {0.0, theta / a, 0.0};
  f.lower_ = 0.0;
  f.upper_ = INFINITY;
  f.scale_ = std::sqrt(b) / a;
  f.log_norm_ = b * std::log(a) - std::lgamma(b);
  return f;
}

PearsonFamily PearsonFamily::jacobi(double theta, double a, double b) {
  require(theta > 0.0, "jacobi", "theta > 0");
  require(a > -1.0, "jacobi", "a > -1");
  require(b > -1.0, "jacobi", "b > -1");
  PearsonFamily f;
  f.kind_ = FamilyKind::Jacobi;
  f.params_ = JacobiParams{theta, a, b};
  const double s = a + b + 2.0;
  f.a_ = {theta * (b - a) / s, -theta};
  f.d_ = {theta / s, 0.0, -theta / s};
  f.lower_ = -1.0;
  f.upper_ = 1.0;
  f.scale_ = 0.5;
  f.log_norm_ = std::lgamma(s) - std::lgamma(a + 1.0) - std::lgamma(b + 1.0) - (s - 1.0) * std::log(2.0);
  return f;
}

PearsonFamily PearsonFamily::fisher_snedecor(double theta, double alpha, double beta) {
  require(theta > 0.0, "fs", "theta > 0");
  require(beta > 2.0, "fs", "beta > 2");
  // The spectral decomposition needs alpha > 2.
  require(alpha > 2.0, "fs", "alpha > 2");
  PearsonFamily f;
  f.kind_ = FamilyKind::FisherSnedecor;
  f.params_ = FSParams{theta, alpha, beta};
  f.a_ = {theta * beta / (beta - 2.0), -theta};
  f.d_ = {0.0, 2.0 * theta * beta / (alpha * (beta - 2.0)), 2.0 * theta / (beta - 2.0)};
  f.lower_ = 0.0;
  f.upper_ = INFINITY;
  f.scale_ = beta / (beta - 2.0);
  f.log_norm_ = -(std::lgamma(alpha / 2) + std::lgamma(beta / 2) - std::lgamma((alpha + beta) / 2));
  return f;
}

PearsonFamily PearsonFamily::reciprocal_gamma(double theta, double alpha, double beta) {
  require(theta > 0.0, "rg", "theta > 0");
  require(alpha > 0.0, "rg", "alpha > 0");
  require(beta > 1.0, "rg", "beta > 1");
  PearsonFamily f;
  f.kind_ = FamilyKind::ReciprocalGamma;
  f.params_ = RGParams{theta, alpha, beta};
  f.a_ = {theta * alpha / (beta - 1.0), -theta};
  f.d_ = {0.0, 0.0, theta / (beta - 1.0)};
  f.lower_ = 0.0;
  f.upper_ = INFINITY;
  f.scale_ = alpha / (beta - 1.0);
  f.log_norm_ = beta * std::log(alpha) - std::lgamma(beta);
  return f;
}

PearsonFamily PearsonFamily::student(double theta, double delta, double nu, double mu,
                                     double mu_prime) {
  require(theta > 0.0, "student", "theta > 0");
  require(delta > 0.0, "student", "delta > 0");
  require(nu > 1.0, "student", "nu > 1");
  require(!is_odd_integer(nu), "student", "nu != 2k - 1 (ergodicity)");
  require(std::isfinite(mu) && std::isfinite(mu_prime), "student", "mu, mu' finite");
  PearsonFamily f;
  f.kind_ = FamilyKind::Student;
  f.params_ = StudentParams{theta, delta, nu, mu, mu_prime};
  const double k = theta / (nu - 1.0);
  f.a_ = {theta * mu, -theta};
  f.d_ = {k * (delta * delta + mu_prime * mu_prime), -2.0 * k * mu_prime, k};
  f.lower_ = -INFINITY;
  f.upper_ = INFINITY;
  f.scale_ = delta;
  // prod_{k>=0} (1 + y^2/(x+k)^2)^{-1} = |Gamma(x + iy)|^2 / Gamma(x)^2.
  const double x0 = (nu + 1.0) / 2.0;
  const double y = (mu - mu_prime) * (nu - 1.0) / (2.0 * delta);
  const double log_prod = 2.0 * special::log_gamma(cplx(x0, y)).real() - 2.0 * std::lgamma(x0);
  f.log_norm_ = std::lgamma(x0) - std::log(delta) - 0.5 * std::log(kPi) - std::lgamma(nu / 2.0) + log_prod;
  return f;
}

PearsonFamily PearsonFamily::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("family: expected a JSON object");
  if (!j.contains("kind") || !j.at("kind").is_string()) throw ConfigError("family: missing string 'kind'");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "ou") {
    reject_unknown(j, {"kind", "theta", "mu", "sigma"});
    return ou(json_number(j, "theta"), json_number(j, "mu"), json_number(j, "sigma"));
  }
  if (kind == "cir") {
    reject_unknown(j, {"kind", "theta", "a", "b"});
    return cir(json_number(j, "theta"), json_number(j, "a"), json_number(j, "b"));
  }
  if (kind == "jacobi") {
    reject_unknown(j, {"kind", "theta", "a", "b"});
    return jacobi(json_number(j, "theta"), json_number(j, "a"), json_number(j, "b"));
  }
  if (kind == "fs") {
    reject_unknown(j, {"kind", "theta", "alpha", "beta"});
    return fisher_snedecor(json_number(j, "theta"), json_number(j, "alpha"), json_number(j, "beta"));
  }
  if (kind == "rg") {
    reject_unknown(j, {"kind", "theta", "alpha", "beta"});
    return reciprocal_gamma(json_number(j, "theta"), json_number(j, "alpha"), json_number(j, "beta"));
  }
  if (kind == "student") {
    reject_unknown(j, {"kind", "theta", "delta", "nu", "mu", "mu_prime"});
    return student(json_number(j, "theta"), json_number(j, "delta"), json_number(j, "nu"),
                   json_number(j, "mu"), json_number(j, "mu_prime"));
  }
  throw ConfigError("family: unknown kind '" + kind + "'");
}

nlohmann::json PearsonFamily::to_json() const {
  return std::visit(
      [&](const auto& p) -> nlohmann::json {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, OUParams>)
          return {{"kind", "ou"}, {"theta", p.theta}, {"mu", p.mu}, {"sigma", p.sigma}};
        else if constexpr (std::is_same_v<P, CIRParams>)
          return {{"kind", "cir"}, {"theta", p.theta}, {"a", p.a}, {"b", p.b}};
        else if constexpr (std::is_same_v<P, JacobiParams>)
          return {{"kind", "jacobi"}, {"theta", p.theta}, {"a", p.a}, {"b", p.b}};
        else if constexpr (std::is_same_v<P, FSParams>)
          return {{"kind", "fs"}, {"theta", p.theta}, {"alpha", p.alpha}, {"beta", p.beta}};
        else if constexpr (std::is_same_v<P, RGParams>)
          return {{"kind", "rg"}, {"theta", p.theta}, {"alpha", p.alpha}, {"beta", p.beta}};
        else
          return {{"kind", "student"}, {"theta", p.theta}, {"delta", p.delta}, {"nu", p.nu},
                  {"mu", p.mu},        {"mu_prime", p.mu_prime}};
      },
      params_);
}

double PearsonFamily::theta() const {
  return std::visit([](const auto& p) { return p.theta; }, params_);
}

SpectralCategory PearsonFamily::category() const {
  switch (kind_) {
    case FamilyKind::OU:
    case FamilyKind::CIR:
    case FamilyKind::Jacobi: return SpectralCategory::I;
    case FamilyKind::FisherSnedecor:
    case FamilyKind::ReciprocalGamma: return SpectralCategory::II;
    case FamilyKind::Student: return SpectralCategory::III;
  }
  return SpectralCategory::I;
}

SpectrumMeta PearsonFamily::spectrum_meta() const {
  const double th = theta();
  if (const auto* p = std::get_if<FSParams>(&params_)) {
    const double b = p->beta;
    return {SpectralCategory::II, int(std::floor(b / 4.0)), th * b * b / (8.0 * (b - 2.0))};
  }
  if (const auto* p = std::get_if<RGParams>(&params_)) {
    const double b = p->beta;
    return {SpectralCategory::II, int(std::floor(b / 2.0)), th * b * b / (4.0 * (b - 1.0))};
  }
  if (const auto* p = std::get_if<StudentParams>(&params_)) {
    const double v = p->nu;
    return {SpectralCategory::III, int(std::floor(v / 2.0)), th * v * v / (4.0 * (v - 1.0))};
  }
  return {SpectralCategory::I, std::nullopt, std::nullopt};
}

int PearsonFamily::last_square_integrable() const {
  const auto meta = spectrum_meta();
  if (!meta.last_index) return -1;
  // Q_n^2 m is integrable iff the 2n-th moment exists, i.e. a1 + (2n-1) d2 < 0.
  int n = *meta.last_index;
  while (n > 0 && !(a_[1] + (2.0 * n - 1.0) * d_[2] < -1e-12 * std::abs(a_[1]))) --n;
  return n;
}

double PearsonFamily::eigenvalue(int n) const {
  if (n < 0) throw DomainError("eigenvalue: index must be nonnegative");
  const auto meta = spectrum_meta();
  if (meta.last_index && n > *meta.last_index)
    throw SpectrumBoundError("eigenvalue: index " + std::to_string(n) + " exceeds N = " +
                             std::to_string(*meta.last_index) + " for family " + name());
  return -double(n) * (a_[1] + (n - 1.0) * d_[2]);
}

void PearsonFamily::check_point(double x, const char* where) const {
  if (!contains(x)) {
    std::ostringstream os;
    os << where << ": x = " << x << " lies outside the state space of " << name();
    throw DomainError(os.str());
  }
}

double PearsonFamily::log_stationary_density(double x) const {
  check_point(x, "stationary_density");
  return std::visit(
      [&](const auto& p) -> double {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, OUParams>) {
          const double z = (x - p.mu) / p.sigma;
          return log_norm_ - 0.5 * z * z;
        } else if constexpr (std::is_same_v<P, CIRParams>) {
          return log_norm_ + (p.b - 1.0) * std::log(x) - p.a * x;
        } else if constexpr (std::is_same_v<P, JacobiParams>) {
          return log_norm_ + p.a * std::log1p(-x) + p.b * std::log1p(x);
        } else if constexpr (std::is_same_v<P, FSParams>) {
          const double ax = p.alpha * x;
          const double lden = std::log(ax + p.beta);
          return log_norm_ + 0.5 * p.alpha * (std::log(ax) - lden) +
                 0.5 * p.beta * (std::log(p.beta) - lden) - std::log(x);
        } else if constexpr (std::is_same_v<P, RGParams>) {
          return log_norm_ - (p.beta + 1.0) * std::log(x) - p.alpha / x;
        } else {
          const double z = (x - p.mu_prime) / p.delta;
          const double c = (p.mu - p.mu_prime) * (p.nu - 1.0) / p.delta;
          return log_norm_ + c * std::atan(z) - 0.5 * (p.nu + 1.0) * std::log1p(z * z);
        }
      },
      params_);
}

double PearsonFamily::stationary_density(double x) const { return std::exp(log_stationary_density(x)); }

double PearsonFamily::integrate_plain(const std::function<double(double)>& h, double rel_tol) const {
  using boost::math::quadrature::exp_sinh;
  using boost::math::quadrature::tanh_sinh;
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  auto f = [&](double x) { return finite_or_zero(h(x)); };
  if (kind_ == FamilyKind::Jacobi) {
    static thread_local tanh_sinh<double> ts;
    return ts.integrate(f, -1.0, 1.0, rel_tol);
  }
  static thread_local exp_sinh<double> es;
  const double c = center(), s = scale_;
  if (lower_ == -INFINITY) {
    // Core on [c - 10s, c + 10s] in unit-width pieces, exp-sinh tails beyond.
    double acc = 0.0;
    for (int k = -10; k < 10; ++k) acc += GK::integrate(f, c + k * s, c + (k + 1) * s, 15, rel_tol);
    auto right = [&](double u) { return f(c + 10 * s + u); };
    auto left = [&](double u) { return f(c - 10 * s - u); };
    return acc + es.integrate(right, rel_tol) + es.integrate(left, rel_tol);
  }
  // (0, infinity): tanh-sinh absorbs the boundary behaviour at 0.
  static thread_local tanh_sinh<double> ts;
  const double split = std::min(c, s) > 0.0 ? std::min(c, s) : s;
  double acc = ts.integrate(f, 0.0, split, rel_tol);
  double a = split;
  for (double b : {c, c + 2 * s, c + 5 * s, c + 10 * s}) {
    if (b <= a) continue;
    acc += GK::integrate(f, a, b, 15, rel_tol);
    a = b;
  }
  auto tail = [&](double u) { return f(a + u); };
  return acc + es.integrate(tail, rel_tol);
}

double PearsonFamily::integrate(const std::function<double(double)>& g, double rel_tol) const {
  return integrate_plain([&](double x) { return g(x) * stationary_density(x); }, rel_tol);
}

namespace {
double fd_step(const PearsonFamily& f, double x) {
  double h = 1e-3 * std::max(f.scale(), 1e-3 * std::abs(x));
  if (std::isfinite(f.lower())) h = std::min(h, (x - f.lower()) / 3.0);
  if (std::isfinite(f.upper())) h = std::min(h, (f.upper() - x) / 3.0);
  return h;
}
}  // namespace

double PearsonFamily::generator_apply(const std::function<double(double)>& g, double x) const {
  check_point(x, "generator_apply");
  const auto d = differentiate(g, x, fd_step(*this, x));
  return drift(x) * d.d1 + diffusion(x) * d.d2;
}

double PearsonFamily::generator_apply(const Polynomial& g, double x) const {
  check_point(x, "generator_apply");
  const Polynomial g1 = g.derivative();
  const Polynomial g2 = g1.derivative();
  return drift(x) * g1(x) + diffusion(x) * g2(x);
}

double PearsonFamily::fokker_planck_apply(const std::function<double(double)>& g, double x) const {
  check_point(x, "fokker_planck_apply");
  const double h = fd_step(*this, x);
  const auto mu_g = differentiate([&](double y) { return drift(y) * g(y); }, x, h);
  const auto d_g = differentiate([&](double y) { return diffusion(y) * g(y); }, x, h);
  return -mu_g.d1 + d_g.d2;
}

// ---------------------------------------------------------------------------
// Orthonormal polynomial systems

struct PolynomialSystem::Impl {
  PearsonFamily family;
  int max_n = 0;
  std::vector<Polynomial> polys;
  std::vector<double> eigenvalues;
};

namespace {

using ExtPoly = std::vector<Ext>;

ExtPoly ext_derivative(const ExtPoly& p) {
  ExtPoly d(p.size() > 1 ? p.size() - 1 : 1, Ext(0));
  for (std::size_t k = 1; k < p.size(); ++k) d[k - 1] = Ext(k) * p[k];
  return d;
}

ExtPoly ext_mul(const ExtPoly& p, const ExtPoly& q) {
  ExtPoly r(p.size() + q.size() - 1, Ext(0));
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < q.size(); ++j) r[i + j] += p[i] * q[j];
  return r;
}

void ext_add(ExtPoly& acc, const ExtPoly& p, const Ext& scale) {
  if (acc.size() < p.size()) acc.resize(p.size(), Ext(0));
  for (std::size_t k = 0; k < p.size(); ++k) acc[k] += scale * p[k];
}

// Raw moments of the stationary law from E[G x^k] = 0:
//   M_k = -[(a0 + (k-1) d1) M_{k-1} + (k-1) d0 M_{k-2}] / (a1 + (k-1) d2).
std::vector<Ext> stationary_moments(const PearsonFamily& f, int kmax) {
  const auto a = f.drift_coefficients();
  const auto d = f.diffusion_coefficients();
  std::vector<Ext> m(kmax + 1, Ext(0));
  m[0] = 1;
  for (int k = 1; k <= kmax; ++k) {
    const Ext km1(k - 1);
    const Ext num = (Ext(a[0]) + km1 * Ext(d[1])) * m[k - 1] + (k >= 2 ? km1 * Ext(d[0]) * m[k - 2] : Ext(0));
    m[k] = -num / (Ext(a[1]) + km1 * Ext(d[2]));
  }
  return m;
}

// Generic Rodrigues formula Q_n ~ (1/m) d^n/dx^n [D^n m]. Writing
// d^j/dx^j [D^n m] = p_j D^{n-j} m gives
//   p_{j+1} = D p_j' + (n - j) D' p_j + r p_j,  r = m' D / m.
ExtPoly rodrigues(const PearsonFamily& f, int n) {
  const auto a = f.drift_coefficients();
  const auto d = f.diffusion_coefficients();
  const ExtPoly D = {Ext(d[0]), Ext(d[1]), Ext(d[2])};
  const ExtPoly Dp = {Ext(d[1]), Ext(2) * Ext(d[2])};
  const ExtPoly r = {Ext(a[0]) - Ext(d[1]), Ext(a[1]) - Ext(2) * Ext(d[2])};
  ExtPoly p = {Ext(1)};
  for (int j = 0; j < n; ++j) {
    ExtPoly next = ext_mul(D, ext_derivative(p));
    ext_add(next, ext_mul(Dp, p), Ext(n - j));
    ext_add(next, ext_mul(r, p), Ext(1));
    p = std::move(next);
  }
  p.resize(n + 1);
  return p;
}

}  // namespace

PolynomialSystem::PolynomialSystem(const PearsonFamily& family, int max_n) {
  if (max_n < 0) throw DomainError("PolynomialSystem: max_n must be nonnegative");
  const int last = family.last_square_integrable();
  if (last >= 0 && max_n > last) {
    const auto meta = family.spectrum_meta();
    throw SpectrumBoundError("PolynomialSystem: Q_" + std::to_string(max_n) + " of " + family.name() +
                             " is not square integrable (N = " + std::to_string(*meta.last_index) +
                             ", last admissible index " + std::to_string(last) + ")");
  }
  auto impl = std::make_shared<Impl>(Impl{family, max_n, {}, {}});
  const auto moments = stationary_moments(family, 2 * max_n);
  for (int n = 0; n <= max_n; ++n) {
    ExtPoly p = rodrigues(family, n);
    Ext norm2 = 0;
    for (int i = 0; i <= n; ++i)
      for (int j = 0; j <= n; ++j) norm2 += p[i] * p[j] * moments[i + j];
    if (!(norm2 > 0)) throw NumericFailure("PolynomialSystem: nonpositive norm for Q_" + std::to_string(n));
    Ext scale = 1 / boost::multiprecision::sqrt(norm2);
    if (p[n] < 0) scale = -scale;
    Polynomial q;
    q.c.reserve(n + 1);
    for (int k = 0; k <= n; ++k) q.c.push_back(static_cast<double>(p[k] * scale));
    impl->polys.push_back(std::move(q));
    impl->eigenvalues.push_back(family.eigenvalue(n));
  }
  impl_ = std::move(impl);
}

const PearsonFamily& PolynomialSystem::family() const { return impl_->family; }
int PolynomialSystem::max_n() const { return impl_->max_n; }

double PolynomialSystem::eigenvalue(int n) const {
  if (n < 0 || n > impl_->max_n) throw SpectrumBoundError("PolynomialSystem: index out of range");
  return impl_->eigenvalues[n];
}

const Polynomial& PolynomialSystem::polynomial(int n) const {
  if (n < 0 || n > impl_->max_n) throw SpectrumBoundError("PolynomialSystem: index out of range");
  return impl_->polys[n];
}

double PolynomialSystem::value(int n, double x) const {
  if (n < 0 || n > impl_->max_n) throw SpectrumBoundError("PolynomialSystem: index out of range");
  if (impl_->family.category() == SpectralCategory::I) {
    std::vector<double> out(n + 1);
    classical_recurrence(impl_->family, x, out);
    return out[n];
  }
  return impl_->polys[n](x);
}

void PolynomialSystem::values(double x, std::span<double> out) const {
  if (out.size() > std::size_t(impl_->max_n) + 1)
    throw SpectrumBoundError("PolynomialSystem: requested more values than max_n + 1");
  if (impl_->family.category() == SpectralCategory::I) {
    classical_recurrence(impl_->family, x, out);
    return;
  }
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = impl_->polys[n](x);
}

std::vector<double> PolynomialSystem::eigen_residual(int n) const {
  const Polynomial& q = polynomial(n);
  const auto a = impl_->family.drift_coefficients();
  const auto d = impl_->family.diffusion_coefficients();
  const double lam = impl_->eigenvalues[n];
  const std::size_t size = q.c.size() + 1;
  std::vector<double> res(size, 0.0), mag(size, 0.0);
  auto add = [&](std::size_t k, double v) {
    res[k] += v;
    mag[k] = std::max(mag[k], std::abs(v));
  };
  for (std::size_t k = 0; k < q.c.size(); ++k) {
    const double c = q.c[k];
    add(k, lam * c);
    if (k >= 1) {
      add(k - 1, a[0] * k * c);
      add(k, a[1] * k * c);
    }
    if (k >= 2) {
      const double kk = double(k) * (k - 1);
      add(k - 2, d[0] * kk * c);
      add(k - 1, d[1] * kk * c);
      add(k, d[2] * kk * c);
    }
  }
  const double scale = std::max(1e-300, *std::max_element(mag.begin(), mag.end()));
  for (double& r : res) r /= scale;
  return res;
}

void classical_recurrence(const PearsonFamily& family, double x, std::span<double> out) {
  if (out.empty()) return;
  out[0] = 1.0;
  if (out.size() == 1) return;
  const std::size_t N = out.size();
  if (const auto* p = std::get_if<OUParams>(&family.params())) {
    const double z = (x - p->mu) / p->sigma;
    out[1] = z;
    for (std::size_t n = 1; n + 1 < N; ++n)
      out[n + 1] = (z * out[n] - std::sqrt(double(n)) * out[n - 1]) / std::sqrt(n + 1.0);
    return;
  }
  if (const auto* p = std::get_if<CIRParams>(&family.params())) {
    const double y = p->a * x, b = p->b;
    out[1] = (y - b) / std::sqrt(b);
    for (std::size_t n = 1; n + 1 < N; ++n)
      out[n + 1] = ((y - 2.0 * n - b) * out[n] - std::sqrt(n * (n + b - 1.0)) * out[n - 1]) /
                   std::sqrt((n + 1.0) * (n + b));
    return;
  }
  if (const auto* p = std::get_if<JacobiParams>(&family.params())) {
    const double a = p->a, b = p->b;
    auto diag = [&](double n) {
      if (n == 0) return (b - a) / (a + b + 2.0);
      const double s = 2 * n + a + b;
      return (b * b - a * a) / (s * (s + 2.0));
    };
    auto off = [&](double n) {  // coefficient linking q_{n-1} and q_n
      if (n == 1) return std::sqrt(4.0 * (1 + a) * (1 + b) / ((2 + a + b) * (2 + a + b) * (3 + a + b)));
      const double s = 2 * n + a + b;
      return std::sqrt(4.0 * n * (n + a) * (n + b) * (n + a + b) / (s * s * (s + 1.0) * (s - 1.0)));
    };
    double prev = 0.0;
    for (std::size_t n = 0; n + 1 < N; ++n) {
      const double cur = out[n];
      out[n + 1] = ((x - diag(double(n))) * cur - (n > 0 ? off(double(n)) * prev : 0.0)) / off(n + 1.0);
      prev = cur;
    }
    return;
  }
  throw UnsupportedError("classical_recurrence: category I families only");
}

GaussRule gauss_rule(const PearsonFamily& family, int n) {
  if (family.category() != SpectralCategory::I)
    throw UnsupportedError("gauss_rule: category I families only");
  if (n < 1) throw DomainError("gauss_rule: need at least one node");
  Eigen::VectorXd diag(n), off(std::max(n - 1, 0));
  double shift = 0.0, stretch = 1.0;
  if (const auto* p = std::get_if<OUParams>(&family.params())) {
    for (int k = 0; k < n; ++k) diag[k] = 0.0;
    for (int k = 1; k < n; ++k) off[k - 1] = std::sqrt(double(k));
    shift = p->mu;
    stretch = p->sigma;
  } else if (const auto* p = std::get_if<CIRParams>(&family.params())) {
    for (int k = 0; k < n; ++k) diag[k] = 2.0 * k + p->b;
    for (int k = 1; k < n; ++k) off[k - 1] = std::sqrt(k * (k + p->b - 1.0));
    stretch = 1.0 / p->a;
  } else {
    const auto& jp = std::get<JacobiParams>(family.params());
    const double a = jp.a, b = jp.b;
    for (int k = 0; k < n; ++k) {
      const double s = 2.0 * k + a + b;
      diag[k] = k == 0 ? (b - a) / (a + b + 2.0) : (b * b - a * a) / (s * (s + 2.0));
    }
    for (int k = 1; k < n; ++k) {
      const double s = 2.0 * k + a + b;
      off[k - 1] = k == 1 ? std::sqrt(4.0 * (1 + a) * (1 + b) / ((2 + a + b) * (2 + a + b) * (3 + a + b)))
                          : std::sqrt(4.0 * k * (k + a) * (k + b) * (k + a + b) / (s * s * (s + 1.0) * (s - 1.0)));
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, off, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw NumericFailure("gauss_rule: eigen decomposition failed");
  // Christoffel weights 1 / sum_j q_j(t)^2 keep full relative accuracy at the
  // outer nodes, where squared eigenvector components would not. The running
  // values are rescaled to stay inside double range.
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int k = 0; k < n; ++k) {
    const double t = solver.eigenvalues()[k];
    double prev = 0.0, cur = 1.0, sum = 1.0, log_scale = 0.0;
    for (int j = 0; j + 1 < n; ++j) {
      const double next = ((t - diag[j]) * cur - (j > 0 ? off[j - 1] * prev : 0.0)) / off[j];
      prev = cur;
      cur = next;
      sum += cur * cur;
      if (std::abs(cur) > 1e100) {
        prev *= 1e-100;
        cur *= 1e-100;
        sum *= 1e-200;
        log_scale += 200.0 * std::log(10.0);
      }
    }
    rule.nodes[k] = shift + stretch * t;
    rule.weights[k] = std::exp(-log_scale) / sum;
  }
  return rule;
}

}  // namespace nlpd
