#pragma once

#include <array>
#include <complex>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "nlpd/polynomial.hpp"

namespace nlpd {

enum class FamilyKind { OU, CIR, Jacobi, FisherSnedecor, ReciprocalGamma, Student };
enum class SpectralCategory { I, II, III };

std::string to_string(FamilyKind kind);
std::string to_string(SpectralCategory category);

struct OUParams { double theta, mu, sigma; };
struct CIRParams { double theta, a, b; };
struct JacobiParams { double theta, a, b; };
struct FSParams { double theta, alpha, beta; };
struct RGParams { double theta, alpha, beta; };
struct StudentParams { double theta, delta, nu, mu, mu_prime; };

using FamilyParams =
    std::variant<OUParams, CIRParams, JacobiParams, FSParams, RGParams, StudentParams>;

struct SpectrumMeta {
  SpectralCategory category;
  std::optional<int> last_index;  // N_j; empty for category I
  std::optional<double> cutoff;   // Lambda_j; empty for category I
};

/// A Pearson diffusion dX = mu(X) dt + sqrt(2 D(X)) dW with linear drift
/// mu(x) = a0 + a1 x and quadratic D(x) = d0 + d1 x + d2 x^2.
class PearsonFamily {
 public:
  static PearsonFamily ou(double theta, double mu, double sigma);
  static PearsonFamily cir(double theta, double a, double b);
  static PearsonFamily jacobi(double theta, double a, double b);
  static PearsonFamily fisher_snedecor(double theta, double alpha, double beta);
  static PearsonFamily reciprocal_gamma(double theta, double alpha, double beta);
  static PearsonFamily student(double theta, double delta, double nu, double mu, double mu_prime);

  /// {"kind":"jacobi","theta":1,"a":0,"b":0} and the analogous forms.
  static PearsonFamily from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  FamilyKind kind() const { return kind_; }
  const FamilyParams& params() const { return params_; }
  std::string name() const { return to_string(kind_); }
  double theta() const;

  double lower() const { return lower_; }
  double upper() const { return upper_; }
  bool contains(double x) const { return x > lower_ && x < upper_; }
  /// Typical spread of the stationary law; sets finite-difference steps and
  /// quadrature splits.
  double scale() const { return scale_; }
  /// Root of the drift, the stationary mean whenever it exists.
  double center() const { return -a_[0] / a_[1]; }

  std::array<double, 2> drift_coefficients() const { return a_; }
  std::array<double, 3> diffusion_coefficients() const { return d_; }
  double drift(double x) const { return a_[0] + a_[1] * x; }
  double diffusion(double x) const { return d_[0] + x * (d_[1] + x * d_[2]); }

  SpectralCategory category() const;
  SpectrumMeta spectrum_meta() const;
  /// Largest n whose eigenfunction Q_n is square integrable against m;
  /// -1 means unbounded (category I).
  int last_square_integrable() const;
  double eigenvalue(int n) const;

  double stationary_density(double x) const;
  double log_stationary_density(double x) const;

  /// int_E g(x) m(x) dx by adaptive quadrature adapted to E.
  double integrate(const std::function<double(double)>& g, double rel_tol = 1e-11) const;
  /// int_E h(x) dx for h that already carries its weight.
  double integrate_plain(const std::function<double(double)>& h, double rel_tol = 1e-11) const;

  /// mu g' + D g'' with derivatives from fourth-order central differences.
  double generator_apply(const std::function<double(double)>& g, double x) const;
  double generator_apply(const Polynomial& g, double x) const;
  /// -(mu g)' + (D g)'' with the same differences.
  double fokker_planck_apply(const std::function<double(double)>& g, double x) const;

 private:
  PearsonFamily() = default;
  void check_point(double x, const char* where) const;

  FamilyKind kind_{};
  FamilyParams params_;
  std::array<double, 2> a_{};
  std::array<double, 3> d_{};
  double lower_ = 0.0, upper_ = 0.0, scale_ = 1.0;
  double log_norm_ = 0.0;
};

/// Orthonormal eigenpolynomials Q_0..Q_max_n of the generator in L^2(m dx).
/// Construction is the expensive step; afterwards every query is const and
/// safe to call concurrently.
class PolynomialSystem {
 public:
  /// Category II/III families cap max_n at the last square-integrable index
  /// and raise SpectrumBoundError beyond it.
  PolynomialSystem(const PearsonFamily& family, int max_n);

  const PearsonFamily& family() const;
  int max_n() const;
  double eigenvalue(int n) const;
  /// Monomial coefficients of Q_n, normalized so int Q_n^2 m dx = 1 with a
  /// positive leading coefficient.
  const Polynomial& polynomial(int n) const;
  double value(int n, double x) const;
  /// Q_0(x)..Q_{out.size()-1}(x). Category I uses the orthonormal three-term
  /// recurrence, which stays accurate at high degree.
  void values(double x, std::span<double> out) const;
  /// Coefficients of mu Q_n' + D Q_n'' + lambda_n Q_n computed from the double
  /// coefficients, divided by the largest contributing term.
  std::vector<double> eigen_residual(int n) const;

  struct Impl;

 private:
  std::shared_ptr<const Impl> impl_;
};

/// Gauss rule for the stationary law of a category I family.
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
GaussRule gauss_rule(const PearsonFamily& family, int n = 200);

/// Orthonormal polynomial values by the classical three-term recurrence
/// (Hermite, Laguerre, Jacobi). Category I only.
void classical_recurrence(const PearsonFamily& family, double x, std::span<double> out);

/// Absolutely continuous spectrum (Lambda_j, infinity) of the FS and RG
/// families: eigenfunctions f_j(x; -lambda) and spectral weights a_j(lambda)
/// so that the continuous part of the transition density is
///   (m(x)/pi) int a_j(lambda) e^{-lambda t} f_j(x) f_j(x0) d lambda.
class ContinuousSpectrum {
 public:
  explicit ContinuousSpectrum(const PearsonFamily& family);

  const PearsonFamily& family() const { return family_; }
  double cutoff() const { return cutoff_; }
  /// Delta_j(lambda); purely imaginary above the cutoff.
  std::complex<double> delta(double lambda) const;
  double eigenfunction(double x, double lambda) const;
  /// f_j at the points xs, computed in one ODE sweep.
  std::vector<double> eigenfunction(std::span<const double> xs, double lambda) const;
  double weight(double lambda) const;
  /// log a_j(lambda); the weight itself overflows for large lambda (RG).
  double log_weight(double lambda) const;

 private:
  void check_lambda(double lambda) const;
  std::vector<double> sweep(std::span<const double> xs, double lambda) const;

  PearsonFamily family_;
  double cutoff_ = 0.0;
};

}  // namespace nlpd
