#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "nlpd/bernstein.hpp"
#include "nlpd/pearson.hpp"
#include "nlpd/relaxation.hpp"

namespace nlpd {

struct SpectralOptions {
  int n_trunc = 0;               // 0 selects 60 (OU, CIR) or 40 (Jacobi)
  int n_trunc_max = 0;           // doubling limit when the tail bound fails; 0 means 16 n_trunc
  double truncation_tol = 1e-6;  // bound on the discarded series tail
  double continuous_tol = 1e-7;  // absolute target for the lambda integral
};

struct DensityEstimate {
  double value = 0.0;        // clamped at 0
  double raw = 0.0;          // before clamping
  double error_bound = 0.0;  // truncation plus quadrature estimate
  bool clamped = false;
  bool continuous_part_omitted = false;  // Student: continuous spectrum not evaluated
};

/// Green kernels of -G on mean-zero functions,
///   G1(x, y) = sum_{n>=1} Q_n(x) Q_n(y) / lambda_n,
///   G2(x, y) = sum_{n>=1} Q_n(x) Q_n(y) / lambda_n^2 = int G1(x,z) G1(z,y) m(z) dz,
/// computed in closed form from the stationary CDF M and the scale density
/// 1/(m D), so they include the continuous spectrum as well.
class GreenFunction {
 public:
  explicit GreenFunction(const PearsonFamily& family);
  double g1(double x, double y) const;
  double g2(double x, double y) const;
  /// Range of x covered by the tables; arguments beyond it are clamped.
  double lower() const;
  double upper() const;

  struct Impl;

 private:
  std::shared_ptr<const Impl> impl_;
};

/// Spectral transition densities p(t, x; x0) of a Pearson diffusion and
/// p_Phi(t, x; x0) of its time change by an inverse subordinator. Immutable
/// after construction; evaluation is safe from several threads.
class SpectralExpansion {
 public:
  SpectralExpansion(PearsonFamily family, std::optional<Bernstein> phi, SpectralOptions options = {});

  const PearsonFamily& family() const;
  const std::optional<Bernstein>& phi() const;
  /// Initial truncation index (category I) or last discrete index (II, III).
  int truncation() const;

  /// Classical density m(x) sum_n e^{-lambda_n t} Q_n(x) Q_n(x0), plus the
  /// continuous part for category II.
  DensityEstimate transition_density(double t, double x, double x0) const;
  std::vector<DensityEstimate> transition_density(double t, std::span<const double> xs, double x0) const;

  /// Non-local density with E_Phi(t; -lambda) in place of e^{-lambda t}.
  DensityEstimate nonlocal_transition_density(double t, double x, double x0) const;
  std::vector<DensityEstimate> nonlocal_transition_density(double t, std::span<const double> xs,
                                                           double x0) const;

  struct Impl;

 private:
  std::shared_ptr<const Impl> impl_;
};

}  // namespace nlpd
