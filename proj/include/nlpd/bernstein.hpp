#pragma once

#include <complex>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

namespace nlpd {

enum class BernsteinKind { Stable, TemperedStable, GeometricStable, Gamma, Custom };

/// Small-lambda behaviour of Phi: Phi regularly varying at 0+ with index rho,
/// or Phi(lambda)/lambda tending to a finite positive limit.
struct RegularVariation {
  enum class Type { Index, LinearLimit, Unknown };
  Type type = Type::Unknown;
  double value = 0.0;
};

enum class Dependence { LongRange, ShortRange, Unknown };

std::string to_string(Dependence d);

/// A driftless, killing-free Bernstein function described by its Levy measure.
/// Immutable; copies share state. All queries are thread-safe.
class Bernstein {
 public:
  using Density = std::function<double(double)>;

  static Bernstein stable(double alpha);
  static Bernstein tempered_stable(double alpha, double theta);
  static Bernstein geometric_stable(double alpha);
  static Bernstein gamma();
  /// Custom Levy density; tail and integrated tail are computed by quadrature
  /// unless supplied.
  static Bernstein custom(Density levy_density, Density tail = {}, Density integrated_tail = {});

  /// {"kind":"stable","alpha":a}, {"kind":"tempered_stable","alpha":a,"theta":t},
  /// {"kind":"geometric_stable","alpha":a} or {"kind":"gamma"}.
  static Bernstein from_json(const nlohmann::json& j);
  /// Custom kinds have no descriptor and raise UnsupportedError.
  nlohmann::json to_json() const;

  BernsteinKind kind() const;
  double alpha() const;  // NaN for Gamma and Custom
  double theta() const;  // NaN unless TemperedStable
  std::string name() const;

  double phi(double lambda) const;
  std::complex<double> phi(std::complex<double> z) const;
  double levy_density(double t) const;
  /// nu-bar(t) = nu(t, infinity)
  double levy_tail(double t) const;
  /// I(t) = int_0^t nu-bar(s) ds
  double integrated_tail(double t) const;

  RegularVariation regular_variation_index() const;
  Dependence classify_dependence() const;

  /// Half-angle beyond pi/2 of a sector on which Re Phi(z) >= 0, used to
  /// shape inversion contours for exp(-s Phi).
  double analytic_sector() const;

  struct Impl;

 private:
  explicit Bernstein(std::shared_ptr<const Impl> impl);
  std::shared_ptr<const Impl> impl_;
};

}  // namespace nlpd
