#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "nlpd/bernstein.hpp"
#include "nlpd/pearson.hpp"
#include "nlpd/relaxation.hpp"

namespace nlpd {

enum class SolutionKind { Backward, Forward };
std::string to_string(SolutionKind kind);

/// Initial datum of a Cauchy problem. Polynomial and tabulated data come from
/// JSON descriptors; arbitrary callables are accepted from C++.
class Datum {
 public:
  enum class Kind { Polynomial, StationaryPolynomial, Tabulated, Function };

  /// g(x) = sum_k c_k x^k.
  static Datum polynomial(std::vector<double> coefficients);
  /// f(x) = m(x) sum_k c_k x^k; the stationary density is supplied at evaluation.
  static Datum stationary_polynomial(std::vector<double> coefficients);
  /// Monotone cubic (PCHIP) interpolation of the samples, zero outside [x_0, x_last].
  static Datum tabulated(std::vector<double> x, std::vector<double> y);
  static Datum function(std::function<double(double)> f, std::string label = "function");

  /// {"kind": "polynomial" | "stationary_polynomial", "coefficients": [...]}
  /// or {"kind": "tabulated", "x": [...], "y": [...]}. A "dirac" kind is
  /// rejected with DatumError: point masses have no L^2 expansion.
  static Datum from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  Kind kind() const { return kind_; }
  double operator()(const PearsonFamily& family, double x) const;
  /// Breakpoints of a tabulated datum (empty otherwise).
  const std::vector<double>& knots() const { return x_; }
  /// Monomial coefficients of a (stationary) polynomial datum.
  const std::vector<double>& coefficients() const { return coefficients_; }

 private:
  Kind kind_ = Kind::Function;
  std::vector<double> coefficients_;
  std::vector<double> x_, y_;
  std::shared_ptr<const std::function<double(double)>> fn_;
  std::string label_;
};

struct ExpandOptions {
  int n = -1;                // truncation N; -1 selects 60 (OU, CIR), 40 (Jacobi) or N_j (II, III)
  int gauss_nodes = 0;       // 0 selects max(200, 2N + 40)
  double tail_tol = 1e-6;    // bound on the L^2(m) reconstruction error
};

/// Coefficients of a datum in the eigenbasis Q_0..Q_N:
///   backward: g_n = int g Q_n m dx;   forward: f_n = int f Q_n dx = <f/m, Q_n>.
struct CoefficientExpansion {
  SolutionKind mode = SolutionKind::Backward;
  std::vector<double> coefficients;
  double norm2 = 0.0;    // ||g||^2 or ||f/m||^2 in L^2(m)
  double l2_tail = 0.0;  // sqrt(norm2 - sum c_n^2), the Parseval tail
  int n() const { return int(coefficients.size()) - 1; }
};

CoefficientExpansion expand(const PearsonFamily& family, const Datum& datum, SolutionKind mode,
                            const ExpandOptions& options = {});

/// u(t, y) = sum E_Phi(t; -lambda_n) g_n Q_n(y) (backward) or
/// v(t, x) = m(x) sum E_Phi(t; -lambda_n) f_n Q_n(x) (forward).
class SolutionField {
 public:
  SolutionField(PearsonFamily family, CoefficientExpansion expansion, Bernstein phi);

  const PearsonFamily& family() const { return family_; }
  const CoefficientExpansion& expansion() const { return expansion_; }
  const Bernstein& phi() const { return relax_.bernstein(); }
  SolutionKind kind() const { return expansion_.mode; }

  double backward(double t, double y) const;
  double forward(double t, double x) const;
  /// Dispatches on kind().
  double operator()(double t, double x) const;

  /// E_Phi(t; -lambda_n) for n = 0..N.
  std::vector<double> relaxation_factors(double t) const;
  /// Field value from precomputed relaxation factors.
  double evaluate(std::span<const double> factors, double x) const;

 private:
  PearsonFamily family_;
  CoefficientExpansion expansion_;
  RelaxationEvaluator relax_;
  std::shared_ptr<const PolynomialSystem> polys_;  // categories II and III
  void q_values(double x, std::span<double> out) const;
};

struct ResidualOptions {
  int time_samples = 400;  // graded samples on [0, max t] for the non-local derivative
};

/// max |d^Phi_t u - G u| (backward) or |d^Phi_t v - F v| (forward) over the grid.
double residual(const SolutionField& field, std::span<const double> t_grid, std::span<const double> x_grid,
                const ResidualOptions& options = {});

/// Same check for an arbitrary space-time field w(t, x).
double residual(const PearsonFamily& family, const Bernstein& phi, SolutionKind kind,
                const std::function<double(double, double)>& field, std::span<const double> t_grid,
                std::span<const double> x_grid, const ResidualOptions& options = {});

}  // namespace nlpd
