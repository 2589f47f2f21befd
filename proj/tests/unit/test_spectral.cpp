#include "doctest.h"
#include "nlpd/errors.hpp"
#include "nlpd/quadrature.hpp"
#include "nlpd/spectral.hpp"
#include "nlpd/subordination.hpp"
#include "oracles.hpp"

#include <cmath>
#include <functional>
#include <vector>

using namespace nlpd;

namespace {

// Composite Simpson in log x over [lo, hi] split at x0 (where the non-local
// density has a kink), for positive state spaces.
double log_simpson_mass(const std::vector<DensityEstimate>& left, const std::vector<DensityEstimate>& right,
                        const std::vector<double>& xl, const std::vector<double>& xr) {
  auto piece = [](const std::vector<DensityEstimate>& v, const std::vector<double>& xs) {
    const int K = int(xs.size()) - 1;
    const double h = std::log(xs[K] / xs[0]) / K;
    double s = 0.0;
    for (int i = 0; i <= K; ++i) {
      const double w = (i == 0 || i == K) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      s += w * v[i].value * xs[i];
    }
    return s * h / 3.0;
  };
  return piece(left, xl) + piece(right, xr);
}

std::vector<double> log_grid(double a, double b, int K) {
  std::vector<double> xs;
  for (int i = 0; i <= K; ++i) xs.push_back(a * std::pow(b / a, double(i) / K));
  xs.front() = a;
  xs.back() = b;
  return xs;
}

}  // namespace

TEST_CASE("Green kernels match the eigen-series for OU") {
  const auto ou = PearsonFamily::ou(1.0, 0.0, 1.0);
  const GreenFunction g(ou);
  const int N = 20000;
  std::vector<double> q(N + 1), q0(N + 1);
  const double y = 0.4;
  classical_recurrence(ou, y, q0);
  for (double x : {-1.3, 0.0, 0.7}) {
    classical_recurrence(ou, x, q);
    double s1 = 0.0, s2 = 0.0;
    for (int n = 1; n <= N; ++n) {
      s1 += q[n] * q0[n] / n;
      s2 += q[n] * q0[n] / (double(n) * n);
    }
    CHECK(g.g1(x, y) == doctest::Approx(s1).epsilon(1e-3));  // the 1/n series converges slowly
    CHECK(g.g2(x, y) == doctest::Approx(s2).epsilon(1e-7));
    CHECK(g.g1(x, y) == doctest::Approx(g.g1(y, x)).epsilon(1e-14));
  }
}

TEST_CASE("Green kernel inverts the generator on eigenfunctions and has mean zero") {
  for (const auto& fam : {PearsonFamily::cir(1, 1, 0.5), PearsonFamily::jacobi(1, 0, 1.5),
                          PearsonFamily::fisher_snedecor(1, 4, 17), PearsonFamily::reciprocal_gamma(1, 1, 9),
                          PearsonFamily::student(1, 1.5, 6, 0.4, -0.3)}) {
    CAPTURE(fam.name());
    const GreenFunction g(fam);
    const int n = std::min(3, fam.last_square_integrable() < 0 ? 3 : fam.last_square_integrable());
    const PolynomialSystem ps(fam, n);
    const double x = fam.kind() == FamilyKind::Jacobi ? 0.3 : fam.center() + 0.3 * fam.scale();
    // Integrate against m on either side of the kink at y = x.
    auto against_m = [&](const std::function<double(double)>& h) {
      auto f = [&](double y) { return h(y) * fam.stationary_density(y); };
      if (fam.kind() != FamilyKind::Jacobi) return fam.integrate(h, 1e-10);
      return quad::endpoint_singular(f, -1.0, x, 1e-11).value + quad::endpoint_singular(f, x, 1.0, 1e-11).value;
    };
    for (int k = 1; k <= n; ++k) {
      const double v = against_m([&](double y) { return g.g1(x, y) * ps.value(k, y); });
      CHECK(v == doctest::Approx(ps.value(k, x) / ps.eigenvalue(k)).epsilon(1e-6));
    }
    CHECK(std::abs(against_m([&](double y) { return g.g1(x, y); })) < 1e-7);
  }
}

TEST_CASE("classical OU and CIR densities match the closed forms") {
  const SpectralExpansion ou(PearsonFamily::ou(1.5, 0.3, 0.8), std::nullopt);
  for (double t : {0.5, 1.0, 3.0})
    for (double x : {-1.5, 0.0, 0.5, 2.0}) {
      const auto d = ou.transition_density(t, x, 0.9);
      CHECK(d.value == doctest::Approx(oracle::ou_kernel(1.5, 0.3, 0.8, t, x, 0.9)).epsilon(1e-9));
      CHECK(d.error_bound <= 1e-6);
    }
  const SpectralExpansion cir(PearsonFamily::cir(1.0, 1.5, 2.0), std::nullopt);
  for (double t : {0.5, 2.0})
    for (double x : {0.1, 0.8, 1.5, 4.0}) {
      const auto d = cir.transition_density(t, x, 1.2);
      CHECK(d.value == doctest::Approx(oracle::cir_kernel(1.0, 1.5, 2.0, t, x, 1.2)).epsilon(1e-8));
    }
}

TEST_CASE("adaptive truncation reaches small times and stops at the cap") {
  const auto fam = PearsonFamily::ou(1.0, 0.0, 1.0);
  const SpectralExpansion ou(fam, std::nullopt);
  CHECK(ou.truncation() == 60);
  const auto d = ou.transition_density(0.1, 0.2, 0.0);
  CHECK(d.error_bound <= 1e-6);
  CHECK(std::abs(d.value - oracle::ou_kernel(1, 0, 1, 0.1, 0.2, 0.0)) <= d.error_bound);
  SpectralOptions capped;
  capped.n_trunc_max = 60;
  const SpectralExpansion tight(fam, std::nullopt, capped);
  CHECK_THROWS_AS(tight.transition_density(0.1, 0.2, 0.0), TruncationError);
}

TEST_CASE("non-local OU density equals the subordination integral") {
  const auto fam = PearsonFamily::ou(1.0, 0.0, 1.0);
  const SpectralExpansion stable(fam, Bernstein::stable(0.5));
  for (double t : {0.5, 1.0})
    for (double x : {-2.0, 0.0, 0.5, 2.5}) {
      const double ref = quad::positive_axis(
          [&](double s) {
            return s <= 0.0 ? 0.0 : oracle::ou_kernel(1, 0, 1, s, x, 0.5) * oracle::inverse_half_stable(s, t);
          },
          1.0, 1e-12).value;
      const auto d = stable.nonlocal_transition_density(t, x, 0.5);
      CHECK(d.value == doctest::Approx(ref).epsilon(1e-6));
      CHECK(std::abs(d.value - ref) <= std::max(d.error_bound, 1e-7));
    }

  const SpectralExpansion gamma(fam, Bernstein::gamma());
  const InverseSubordinatorDensity isd(Bernstein::gamma());
  for (double x : {-1.0, 0.3, 1.7}) {
    const double ref = quad::positive_axis(
        [&](double s) { return s <= 0.0 ? 0.0 : oracle::ou_kernel(1, 0, 1, s, x, 0.0) * isd(s, 1.0); }, 1.0,
        1e-10).value;
    CHECK(gamma.nonlocal_transition_density(1.0, x, 0.0).value == doctest::Approx(ref).epsilon(1e-5));
  }
}

TEST_CASE("non-local CIR and Jacobi densities conserve mass and are reversible") {
  const auto cir = PearsonFamily::cir(1.0, 1.0, 1.0);
  const SpectralExpansion se(cir, Bernstein::stable(0.7));
  const double x0 = 1.0;
  const auto xl = log_grid(1e-6, x0, 400), xr = log_grid(x0, 40.0, 400);
  const double mass = log_simpson_mass(se.nonlocal_transition_density(1.0, xl, x0),
                                       se.nonlocal_transition_density(1.0, xr, x0), xl, xr);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-5));

  const auto jac = PearsonFamily::jacobi(1.0, 0.0, 1.5);
  const SpectralExpansion sj(jac, Bernstein::tempered_stable(0.6, 1.0));
  for (double x : {-0.6, 0.1, 0.8}) {
    const double y = 0.35;
    const double lhs = jac.stationary_density(y) * sj.nonlocal_transition_density(0.7, x, y).value;
    const double rhs = jac.stationary_density(x) * sj.nonlocal_transition_density(0.7, y, x).value;
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-7));
  }
  const double jmass = quad::adaptive([&](double x) { return sj.nonlocal_transition_density(0.7, x, 0.35).value; },
                                      -1.0, 0.35, 1e-9).value +
                       quad::adaptive([&](double x) { return sj.nonlocal_transition_density(0.7, x, 0.35).value; },
                                      0.35, 1.0, 1e-9).value;
  CHECK(jmass == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("category II densities: mass, reversibility and the discrete projection") {
  for (const auto& fam : {PearsonFamily::fisher_snedecor(1, 4, 17), PearsonFamily::reciprocal_gamma(1, 1, 9)}) {
    CAPTURE(fam.name());
    const SpectralExpansion se(fam, Bernstein::stable(0.5));
    const double x0 = fam.center();
    const auto xl = log_grid(x0 * 1e-5, x0, 300), xr = log_grid(x0, 300.0 * x0, 300);

    const double mc = log_simpson_mass(se.transition_density(1.0, xl, x0), se.transition_density(1.0, xr, x0), xl, xr);
    CHECK(mc == doctest::Approx(1.0).epsilon(1e-6));
    const double mn = log_simpson_mass(se.nonlocal_transition_density(1.0, xl, x0),
                                       se.nonlocal_transition_density(1.0, xr, x0), xl, xr);
    CHECK(mn == doctest::Approx(1.0).epsilon(1e-5));

    const double y = 0.6 * x0;
    const double lhs = fam.stationary_density(x0) * se.transition_density(0.8, y, x0).raw;
    const double rhs = fam.stationary_density(y) * se.transition_density(0.8, x0, y).raw;
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-8));

    // int p(t, x; x0) Q_1(x) dx = e^{-lambda_1 t} Q_1(x0): the continuous part drops out.
    const PolynomialSystem ps(fam, 1);
    auto dens = [&](const std::vector<double>& xs) {
      auto v = se.transition_density(1.0, xs, x0);
      for (std::size_t i = 0; i < xs.size(); ++i) v[i].value *= ps.value(1, xs[i]);
      return v;
    };
    const auto xr_wide = log_grid(x0, 1e4 * x0, 400);
    const double proj = log_simpson_mass(dens(xl), dens(xr_wide), xl, xr_wide);
    CHECK(proj == doctest::Approx(std::exp(-ps.eigenvalue(1)) * ps.value(1, x0)).epsilon(1e-5));
  }
}

TEST_CASE("Student densities keep the discrete part and flag the omission") {
  const auto fam = PearsonFamily::student(1.0, 1.5, 6.0, 0.4, -0.3);
  const SpectralExpansion se(fam, Bernstein::stable(0.5));
  const RelaxationEvaluator relax(Bernstein::stable(0.5));
  const PolynomialSystem ps(fam, 2);
  CHECK(se.truncation() == 2);
  for (double x : {-0.5, 0.4, 1.7}) {
    const auto d = se.nonlocal_transition_density(1.0, x, 0.2);
    CHECK(d.continuous_part_omitted);
    double expect = 0.0;
    for (int n = 0; n <= 2; ++n) expect += relax(1.0, ps.eigenvalue(n)) * ps.value(n, x) * ps.value(n, 0.2);
    CHECK(d.raw == doctest::Approx(expect * fam.stationary_density(x)).epsilon(1e-12));
    CHECK(d.value == std::max(d.raw, 0.0));
  }
}

TEST_CASE("spectral input checks") {
  const SpectralExpansion classical(PearsonFamily::cir(1, 1, 1), std::nullopt);
  CHECK_THROWS_AS(classical.nonlocal_transition_density(1.0, 1.0, 1.0), ConfigError);
  CHECK_THROWS_AS(classical.transition_density(0.0, 1.0, 1.0), DomainError);
  CHECK_THROWS_AS(classical.transition_density(1.0, -1.0, 1.0), DomainError);
  CHECK_THROWS_AS(classical.transition_density(1.0, 1.0, 0.0), DomainError);
  SpectralOptions bad;
  bad.n_trunc = -1;
  CHECK_THROWS_AS(SpectralExpansion(PearsonFamily::ou(1, 0, 1), std::nullopt, bad), ConfigError);
}
