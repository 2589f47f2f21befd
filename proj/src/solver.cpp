#include "nlpd/solver.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <boost/math/quadrature/gauss.hpp>

#include "nlpd/errors.hpp"
#include "pchip.hpp"

namespace nlpd {

std::string to_string(SolutionKind kind) { return kind == SolutionKind::Backward ? "backward" : "forward"; }

// ---------------------------------------------------------------------------
// Datum
// ---------------------------------------------------------------------------

namespace {

double horner(const std::vector<double>& c, double x) {
  double acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
  return acc;
}

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("datum: unknown key \"" + key + "\"");
  }
}

}  // namespace

Datum Datum::polynomial(std::vector<double> coefficients) {
  if (coefficients.empty()) throw ConfigError("datum: polynomial needs at least one coefficient");
  Datum d;
  d.kind_ = Kind::Polynomial;
  d.coefficients_ = std::move(coefficients);
  return d;
}

Datum Datum::stationary_polynomial(std::vector<double> coefficients) {
  Datum d = polynomial(std::move(coefficients));
  d.kind_ = Kind::StationaryPolynomial;
  return d;
}

Datum Datum::tabulated(std::vector<double> x, std::vector<double> y) {
  if (x.size() != y.size() || x.size() < 4)
    throw ConfigError("datum: tabulated data need equal-length x and y with at least 4 points");
  for (std::size_t i = 0; i + 1 < x.size(); ++i)
    if (!(x[i + 1] > x[i])) throw ConfigError("datum: tabulated x must be strictly increasing");
  for (double v : y)
    if (!std::isfinite(v)) throw DatumError("datum: tabulated values must be finite");
  Datum d;
  d.kind_ = Kind::Tabulated;
  d.x_ = x;
  d.y_ = y;
  using Pchip = boost::math::interpolators::pchip<std::vector<double>>;
  auto interp = std::make_shared<Pchip>(std::move(x), std::move(y));
  d.fn_ = std::make_shared<const std::function<double(double)>>([interp](double v) { return (*interp)(v); });
  return d;
}

Datum Datum::function(std::function<double(double)> f, std::string label) {
  Datum d;
  d.kind_ = Kind::Function;
  d.fn_ = std::make_shared<const std::function<double(double)>>(std::move(f));
  d.label_ = std::move(label);
  return d;
}

Datum Datum::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind")) throw ConfigError("datum: expected an object with a \"kind\"");
  const std::string kind = j.at("kind").get<std::string>();
  try {
    if (kind == "polynomial" || kind == "stationary_polynomial") {
      check_keys(j, {"kind", "coefficients"});
      auto c = j.at("coefficients").get<std::vector<double>>();
      return kind == "polynomial" ? polynomial(std::move(c)) : stationary_polynomial(std::move(c));
    }
    if (kind == "tabulated") {
      check_keys(j, {"kind", "x", "y"});
      return tabulated(j.at("x").get<std::vector<double>>(), j.at("y").get<std::vector<double>>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("datum: ") + e.what());
  }
  if (kind == "dirac")
    throw DatumError(
        "datum: Dirac initial data have no L^2(m) expansion; evaluate the transition density instead "
        "(subcommand density)");
  throw ConfigError("datum: unknown kind \"" + kind + "\"");
}

nlohmann::json Datum::to_json() const {
  switch (kind_) {
    case Kind::Polynomial: return {{"kind", "polynomial"}, {"coefficients", coefficients_}};
    case Kind::StationaryPolynomial: return {{"kind", "stationary_polynomial"}, {"coefficients", coefficients_}};
    case Kind::Tabulated: return {{"kind", "tabulated"}, {"x", x_}, {"y", y_}};
    default: throw UnsupportedError("datum: a C++ callable (" + label_ + ") has no JSON form");
  }
}

double Datum::operator()(const PearsonFamily& family, double x) const {
  switch (kind_) {
    case Kind::Polynomial: return horner(coefficients_, x);
    case Kind::StationaryPolynomial: return family.stationary_density(x) * horner(coefficients_, x);
    case Kind::Tabulated:
      if (x < x_.front() || x > x_.back()) return 0.0;
      return (*fn_)(x);
    default: return (*fn_)(x);
  }
}

// ---------------------------------------------------------------------------
// Expansion
// ---------------------------------------------------------------------------

namespace {

int default_truncation(const PearsonFamily& family) {
  if (family.category() != SpectralCategory::I) return family.last_square_integrable();
  return family.kind() == FamilyKind::Jacobi ? 40 : 60;
}

void values(const PearsonFamily& family, const PolynomialSystem* polys, double x, std::span<double> out) {
  if (polys)
    polys->values(x, out);
  else
    classical_recurrence(family, x, out);
}

// Crude divergence test for int h(x) dx near each boundary: the integrand
// times the distance to the boundary (or |x| at infinity) must decrease as the
// boundary is approached.
void check_square_integrable(const PearsonFamily& family, const std::function<double(double)>& h) {
  auto probe = [&](double x) {
    const double v = h(x);
    return std::isfinite(v) ? std::abs(v) : INFINITY;
  };
  const double c = family.kind() == FamilyKind::Jacobi ? 0.0 : family.center(), s = family.scale();
  auto check_pair = [&](double near, double far, double wn, double wf) {
    const double a = probe(near) * wn, b = probe(far) * wf;
    if (!std::isfinite(b) || (b > 1e-300 && b >= a * (1.0 - 1e-9)))
      throw DatumError("datum is not square integrable against the stationary density");
  };
  if (family.upper() == INFINITY)
    check_pair(c + 1e3 * s, c + 1e5 * s, 1e3 * s, 1e5 * s);
  else
    check_pair(family.upper() - 1e-6, family.upper() - 1e-12, 1e-6, 1e-12);
  if (family.lower() == -INFINITY)
    check_pair(c - 1e3 * s, c - 1e5 * s, 1e3 * s, 1e5 * s);
  else {
    const double span = family.lower() == 0.0 ? s : 1.0;
    check_pair(family.lower() + 1e-6 * span, family.lower() + 1e-12 * span, 1e-6 * span, 1e-12 * span);
  }
}

}  // namespace

CoefficientExpansion expand(const PearsonFamily& family, const Datum& datum, SolutionKind mode,
                            const ExpandOptions& options) {
  const bool discrete_only = family.category() != SpectralCategory::I;
  const int N = options.n < 0 ? default_truncation(family) : options.n;
  std::unique_ptr<PolynomialSystem> polys;
  if (discrete_only) polys = std::make_unique<PolynomialSystem>(family, N);  // SpectrumBoundError past N_j

  const bool forward = mode == SolutionKind::Forward;
  // h is the function expanded in L^2(m): g itself, or f/m.
  auto h = [&](double x) -> double {
    if (!forward) return datum(family, x);
    if (datum.kind() == Datum::Kind::StationaryPolynomial) return horner(datum.coefficients(), x);
    const double f = datum(family, x);
    return f == 0.0 ? 0.0 : f / family.stationary_density(x);
  };
  if (datum.kind() != Datum::Kind::Tabulated)
    check_square_integrable(family, [&](double x) {
      const double v = h(x);
      return v * v * family.stationary_density(x);
    });

  CoefficientExpansion out;
  out.mode = mode;
  out.coefficients.assign(N + 1, 0.0);
  std::vector<double> q(N + 1);
  double norm2 = 0.0;

  // Accumulates weight * h(x) * Q_n(x) and weight * h(x)^2 for one node; the
  // weight already includes m(x).
  auto accumulate = [&](double x, double w) {
    if (w == 0.0) return;
    const double v = h(x);
    if (v == 0.0) return;
    if (!std::isfinite(v)) throw DatumError("datum is not finite at x = " + std::to_string(x));
    values(family, polys.get(), x, q);
    for (int n = 0; n <= N; ++n) out.coefficients[n] += w * v * q[n];
    norm2 += w * v * v;
  };

  if (datum.kind() == Datum::Kind::Tabulated) {
    // Composite Gauss-Legendre on the table cells inside the state space.
    using GL = boost::math::quadrature::gauss<double, 20>;
    const auto& ax = GL::abscissa();
    const auto& aw = GL::weights();
    const auto& k = datum.knots();
    for (std::size_t i = 0; i + 1 < k.size(); ++i) {
      const double a = std::max(k[i], family.lower()), b = std::min(k[i + 1], family.upper());
      if (!(b > a)) continue;
      const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
      for (std::size_t j = 0; j < ax.size(); ++j)
        for (int sgn : {1, -1}) {
          if (ax[j] == 0.0 && sgn < 0) continue;
          const double x = mid + sgn * half * ax[j];
          if (!family.contains(x)) continue;
          accumulate(x, aw[j] * half * family.stationary_density(x));
        }
    }
  } else if (!discrete_only) {
    const int nodes = options.gauss_nodes > 0 ? options.gauss_nodes : std::max(200, 2 * N + 40);
    const GaussRule rule = gauss_rule(family, nodes);
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) accumulate(rule.nodes[i], rule.weights[i]);
  } else {
    for (int n = 0; n <= N; ++n)
      out.coefficients[n] = family.integrate([&](double x) { return h(x) * polys->value(n, x); }, 1e-11);
    norm2 = family.integrate([&](double x) {
      const double v = h(x);
      return v * v;
    }, 1e-11);
  }
  if (!std::isfinite(norm2)) throw DatumError("datum is not square integrable against the stationary density");

  double sum2 = 0.0;
  for (double c : out.coefficients) sum2 += c * c;
  if (sum2 > norm2 * (1.0 + 1e-8) + 1e-8)
    throw NumericFailure("expand: Bessel inequality violated (" + std::to_string(sum2) + " > " +
                         std::to_string(norm2) + "); quadrature too coarse");
  out.norm2 = norm2;
  out.l2_tail = std::sqrt(std::max(0.0, norm2 - sum2));
  const double allowed = options.tail_tol * std::max(1.0, std::sqrt(norm2));
  if (out.l2_tail > allowed) {
    if (discrete_only)
      throw UnsupportedError("expand: the datum is not in the span of the discrete eigenfunctions of " +
                             family.name() + " (L^2 tail " + std::to_string(out.l2_tail) +
                             "); the continuous part has no computable expansion here");
    throw TruncationError("expand: L^2 tail " + std::to_string(out.l2_tail) + " exceeds " +
                          std::to_string(allowed) + " at N = " + std::to_string(N) + "; increase N");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Solution field
// ---------------------------------------------------------------------------

SolutionField::SolutionField(PearsonFamily family, CoefficientExpansion expansion, Bernstein phi)
    : family_(std::move(family)), expansion_(std::move(expansion)), relax_(std::move(phi)) {
  if (expansion_.coefficients.empty()) throw ConfigError("SolutionField: empty expansion");
  if (family_.category() != SpectralCategory::I)
    polys_ = std::make_shared<const PolynomialSystem>(family_, expansion_.n());
}

void SolutionField::q_values(double x, std::span<double> out) const { values(family_, polys_.get(), x, out); }

std::vector<double> SolutionField::relaxation_factors(double t) const {
  if (!(t >= 0.0)) throw DomainError("SolutionField: t must be nonnegative");
  const int N = expansion_.n();
  std::vector<double> f(N + 1, 0.0);
  for (int n = 0; n <= N; ++n) {
    if (expansion_.coefficients[n] == 0.0) continue;
    f[n] = (n == 0 || t == 0.0) ? 1.0 : relax_(t, family_.eigenvalue(n));
  }
  return f;
}

double SolutionField::evaluate(std::span<const double> factors, double x) const {
  if (!family_.contains(x)) throw DomainError("SolutionField: x outside the state space");
  const int N = expansion_.n();
  std::vector<double> q(N + 1);
  q_values(x, q);
  double acc = 0.0;
  for (int n = 0; n <= N; ++n) acc += factors[n] * expansion_.coefficients[n] * q[n];
  return kind() == SolutionKind::Forward ? family_.stationary_density(x) * acc : acc;
}

double SolutionField::backward(double t, double y) const {
  if (kind() != SolutionKind::Backward) throw ConfigError("SolutionField: this is a forward solution");
  return evaluate(relaxation_factors(t), y);
}

double SolutionField::forward(double t, double x) const {
  if (kind() != SolutionKind::Forward) throw ConfigError("SolutionField: this is a backward solution");
  return evaluate(relaxation_factors(t), x);
}

double SolutionField::operator()(double t, double x) const { return evaluate(relaxation_factors(t), x); }

// ---------------------------------------------------------------------------
// Residual
// ---------------------------------------------------------------------------

namespace {

std::vector<double> sample_times(std::span<const double> t_grid, int n) {
  if (t_grid.empty()) throw DomainError("residual: empty time grid");
  double tmax = 0.0;
  for (double t : t_grid) {
    if (!(t > 0.0)) throw DomainError("residual: grid times must be positive");
    tmax = std::max(tmax, t);
  }
  auto ts = graded_grid(tmax, n, 3.0);
  ts.insert(ts.end(), t_grid.begin(), t_grid.end());
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  return ts;
}

}  // namespace

double residual(const PearsonFamily& family, const Bernstein& phi, SolutionKind kind,
                const std::function<double(double, double)>& field, std::span<const double> t_grid,
                std::span<const double> x_grid, const ResidualOptions& options) {
  const auto ts = sample_times(t_grid, options.time_samples);
  double worst = 0.0;
  for (double x : x_grid) {
    SampledFunction u;
    u.t = ts;
    u.u.reserve(ts.size());
    for (double t : ts) u.u.push_back(field(t, x));
    for (double t : t_grid) {
      const double lhs = nonlocal_derivative(phi, u, t);
      const auto slice = [&](double y) { return field(t, y); };
      const double rhs =
          kind == SolutionKind::Backward ? family.generator_apply(slice, x) : family.fokker_planck_apply(slice, x);
      worst = std::max(worst, std::abs(lhs - rhs));
    }
  }
  return worst;
}

double residual(const SolutionField& field, std::span<const double> t_grid, std::span<const double> x_grid,
                const ResidualOptions& options) {
  // Relaxation factors depend on t only; compute them once per sample time.
  std::map<double, std::vector<double>> cache;
  for (double t : sample_times(t_grid, options.time_samples)) cache.emplace(t, field.relaxation_factors(t));
  auto w = [&](double t, double x) {
    auto it = cache.find(t);
    if (it == cache.end()) it = cache.emplace(t, field.relaxation_factors(t)).first;
    return field.evaluate(it->second, x);
  };
  return residual(field.family(), field.phi(), field.kind(), w, t_grid, x_grid, options);
}

}  // namespace nlpd
