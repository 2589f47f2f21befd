#include "doctest.h"
#include "nlpd/errors.hpp"
#include "nlpd/montecarlo.hpp"
#include "nlpd/relaxation.hpp"
#include "nlpd/spectral.hpp"
#include "nlpd/subordination.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <set>

using namespace nlpd;
using namespace nlpd::mc;

namespace {

std::vector<double> densities(const std::vector<DensityEstimate>& v) {
  std::vector<double> out;
  for (const auto& d : v) out.push_back(d.value);
  return out;
}

}  // namespace

TEST_CASE("seed derivation separates paths and streams") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t p = 0; p < 1000; ++p)
    for (auto s : {Stream::Diffusion, Stream::Clock, Stream::Initial}) seen.insert(derive_seed(42, p, s));
  CHECK(seen.size() == 3000);
  CHECK(derive_seed(1, 0, Stream::Clock) != derive_seed(2, 0, Stream::Clock));

  // First draws of the diffusion and clock streams are uncorrelated across paths.
  std::vector<double> a, b;
  for (std::uint64_t p = 0; p < 20000; ++p) {
    Engine rx(derive_seed(7, p, Stream::Diffusion)), rl(derive_seed(7, p, Stream::Clock));
    a.push_back(std::normal_distribution<double>()(rx));
    b.push_back(double(rl() >> 11) * 0x1p-53);
  }
  const auto c = correlation(a, b);
  CHECK(std::abs(c.value) <= 3.0 * c.std_error);
}

TEST_CASE("results do not depend on the worker count") {
  const auto fam = PearsonFamily::cir(1, 1, 1);
  const auto phi = Bernstein::gamma();
  const std::vector<double> grid{0.0, 0.5, 1.0};
  SimulationOptions one, four;
  one.threads = 1;
  four.threads = 4;
  const auto a = simulate_nonlocal(fam, phi, 1.0, grid, 500, 99, one);
  const auto b = simulate_nonlocal(fam, phi, 1.0, grid, 500, 99, four);
  CHECK(a.values == b.values);
  CHECK(a.provenance.boundary_events == b.provenance.boundary_events);
  const auto c = simulate_nonlocal(fam, phi, 1.0, grid, 500, 100, one);
  CHECK(a.values != c.values);
}

TEST_CASE("classical OU and CIR paths") {
  const auto ou = PearsonFamily::ou(1, 0, 1);
  const std::vector<double> grid{0.0, 1.0};
  const auto ts = simulate_pearson(ou, 2.0, grid, 100000, 1);
  CHECK(ts.at(0, 0) == 2.0);
  const auto m = estimate_mean(ts.column(1));
  CHECK(std::abs(m.value - 2.0 * std::exp(-1.0)) <= 3.0 * m.std_error);

  // Euler CIR: positivity and the mean b/a + (x0 - b/a) e^{-t}, with a dt-halving check.
  const auto cir = PearsonFamily::cir(1, 1, 1);
  for (double dt : {2e-3, 1e-3}) {
    SimulationOptions o;
    o.dt = dt;
    const auto c = simulate_pearson(cir, 2.0, grid, 20000, 2, o);
    const auto col = c.column(1);
    CHECK(*std::min_element(col.begin(), col.end()) > 0.0);
    const auto cm = estimate_mean(col);
    CHECK(std::abs(cm.value - (1.0 + std::exp(-1.0))) <= 3.0 * cm.std_error);
  }

  SimulationOptions coarse;
  coarse.dt = 0.2;
  CHECK_THROWS_AS(simulate_pearson(cir, 1.0, grid, 10, 1, coarse), ConfigError);
  SimulationOptions exact;
  exact.scheme = Scheme::Exact;
  CHECK_THROWS_AS(simulate_pearson(cir, 1.0, grid, 10, 1, exact), UnsupportedError);
  CHECK_THROWS_AS(simulate_pearson(cir, -1.0, grid, 10, 1), DomainError);
}

TEST_CASE("Jacobi paths stay in (-1, 1) and relax to the uniform law") {
  const auto jac = PearsonFamily::jacobi(1, 0, 0);
  SimulationOptions o;
  o.dt = 1e-2;
  const std::vector<double> grid{0.0, 6.0};
  const auto ts = simulate_pearson(jac, 0.9, grid, 100000, 3, o);
  const auto col = ts.column(1);
  CHECK(*std::min_element(col.begin(), col.end()) > -1.0);
  CHECK(*std::max_element(col.begin(), col.end()) < 1.0);
  const auto h = histogram(col, -1.0, 1.0, 20);
  const std::vector<double> ref(20, 0.05);
  CHECK(l1_distance(h, ref) <= 0.03);
}

TEST_CASE("stationary samplers reproduce the stationary means") {
  struct Case {
    PearsonFamily f;
    double mean;
  };
  const std::vector<Case> cases{
      {PearsonFamily::ou(1, 0.3, 2.0), 0.3},
      {PearsonFamily::cir(1, 2.0, 3.0), 1.5},
      {PearsonFamily::jacobi(1, 0.0, 1.5), 1.5 / 3.5},
      {PearsonFamily::fisher_snedecor(1, 4, 17), 17.0 / 15.0},
      {PearsonFamily::reciprocal_gamma(1, 1, 9), 1.0 / 8.0},
      {PearsonFamily::student(1, 1.5, 6, 0.4, -0.3), 0.4},
  };
  for (const auto& c : cases) {
    CAPTURE(c.f.name());
    const StationarySampler sample(c.f);
    Engine rng(123);
    std::vector<double> xs(200000);
    for (double& x : xs) x = sample(rng);
    const auto m = estimate_mean(xs);
    CHECK(std::abs(m.value - c.mean) <= 4.0 * m.std_error);
    CHECK(std::all_of(xs.begin(), xs.end(), [&](double x) { return c.f.contains(x); }));
  }
  // The tabulated Student distribution function against quadrature.
  const auto st = PearsonFamily::student(1, 1.5, 6, 0.4, -0.3);
  const StationarySampler sample(st);
  Engine rng(5);
  std::size_t below = 0;
  const std::size_t n = 400000;
  for (std::size_t i = 0; i < n; ++i) below += sample(rng) < 1.0;
  const double F = st.integrate_plain([&](double x) { return x < 1.0 ? st.stationary_density(x) : 0.0; });
  const double se = std::sqrt(F * (1 - F) / n);
  CHECK(std::abs(double(below) / n - F) <= 4.0 * se);
}

TEST_CASE("inverse subordinator paths") {
  const std::vector<double> grid{0.0, 0.5, 1.0};
  const auto ts = simulate_inverse_subordinator(Bernstein::stable(0.5), grid, 100000, 11);
  bool starts_at_zero = true, nondecreasing = true;
  for (std::size_t i = 0; i < ts.n_paths; ++i) {
    starts_at_zero = starts_at_zero && ts.at(i, 0) == 0.0;
    nondecreasing = nondecreasing && ts.at(i, 1) <= ts.at(i, 2);
  }
  CHECK(starts_at_zero);
  CHECK(nondecreasing);
  const auto L1 = ts.column(2);
  const auto m = estimate_mean(L1);
  CHECK(std::abs(m.value - 1.0 / std::tgamma(1.5)) <= 3.0 * m.std_error);
  const auto h = histogram(L1, 0.0, 6.0, 40);
  const auto ref = bin_masses(h, [](std::span<const double> s) {
    std::vector<double> v;
    for (double x : s) v.push_back(oracle::inverse_half_stable(x, 1.0));
    return v;
  });
  CHECK(l1_distance(h, ref) <= 0.03);

  for (const auto& phi : {Bernstein::tempered_stable(0.5, 1.0), Bernstein::geometric_stable(0.5), Bernstein::gamma()}) {
    CAPTURE(phi.name());
    const auto t2 = simulate_inverse_subordinator(phi, grid, 20000, 12);
    const auto e = estimate_mean(t2.column(2));
    const RenewalFunction U(phi, 10.0);
    // The operational grid biases L down by at most one step.
    CHECK(std::abs(e.value - U(1.0)) <= 3.0 * e.std_error + 1e-3);
  }

  const auto custom = Bernstein::custom([](double t) { return std::exp(-t) / std::pow(t, 1.5); });
  CHECK_THROWS_AS(simulate_inverse_subordinator(custom, grid, 10, 1), UnsupportedError);
  const std::vector<double> bad{0.5, 1.0};
  CHECK_THROWS_AS(simulate_inverse_subordinator(Bernstein::gamma(), bad, 10, 1), DomainError);
}

TEST_CASE("non-local OU paths match the spectral density") {
  const auto ou = PearsonFamily::ou(1, 0, 1);
  const auto phi = Bernstein::stable(0.5);
  const std::vector<double> grid{0.0, 1.0};
  const auto ts = simulate_nonlocal(ou, phi, 0.5, grid, 50000, 21);
  const auto start = ts.column(0);
  CHECK(std::all_of(start.begin(), start.end(), [](double x) { return x == 0.5; }));
  const SpectralExpansion se(ou, phi);
  const auto h = histogram(ts.column(1), -4.0, 4.0, 32);
  const auto ref = bin_masses(h, [&](std::span<const double> xs) {
    return densities(se.nonlocal_transition_density(1.0, xs, 0.5));
  });
  const double d = l1_distance(h, ref);
  MESSAGE("L1 " << d);
  CHECK(d <= 0.03);
}

TEST_CASE("stationary start keeps the marginal and the correlation follows the relaxation function") {
  const auto ou = PearsonFamily::ou(1, 0, 1);
  const auto phi = Bernstein::stable(0.5);
  SimulationOptions o;
  o.stationary_start = true;
  const std::vector<double> grid{0.0, 0.5, 1.0};
  const auto ts = simulate_nonlocal(ou, phi, 0.0, grid, 50000, 31, o);
  const auto h = histogram(ts.column(2), -4.0, 4.0, 32);
  const auto ref = bin_masses(h, [&](std::span<const double> xs) {
    std::vector<double> v;
    for (double x : xs) v.push_back(ou.stationary_density(x));
    return v;
  });
  CHECK(l1_distance(h, ref) <= 0.03);

  const auto c = estimate_correlation(ts, 1.0, 0.0);
  MESSAGE("corr " << c.value << " +- " << c.std_error);
  CHECK(std::abs(c.value - std::exp(1.0) * std::erfc(1.0)) <= 3.0 * c.std_error);
  CHECK(estimate_correlation(ts, 1.0, 1.0).value == 1.0);

  const auto plain = simulate_nonlocal(ou, phi, 0.0, grid, 100, 31);
  CHECK_THROWS_AS(estimate_correlation(plain, 1.0, 0.0), ConfigError);
  CHECK_THROWS_AS(estimate_correlation(ts, 0.7, 0.0), DomainError);
}

TEST_CASE("trajectory files round trip") {
  const auto ts = simulate_nonlocal(PearsonFamily::cir(1, 1, 1), Bernstein::gamma(), 1.0,
                                    std::vector<double>{0.0, 0.25, 1.0}, 37, 5);
  const auto base = std::filesystem::temp_directory_path() / "nlpd_traj_test";
  ts.save(base);
  const auto back = TrajectorySet::load(base);
  CHECK(back.values == ts.values);
  CHECK(back.time_grid == ts.time_grid);
  CHECK(back.master_seed == 5);
  CHECK(back.provenance.to_json() == ts.provenance.to_json());
  std::filesystem::remove(base.string() + ".bin");
  std::filesystem::remove(base.string() + ".json");
}

TEST_CASE("histogram distance bookkeeping") {
  const std::vector<double> xs{-2.0, 0.1, 0.2, 0.7, 3.0};
  const auto h = histogram(xs, 0.0, 1.0, 2);
  CHECK(h.below == 1);
  CHECK(h.above == 1);
  CHECK(h.counts[0] == 2);
  CHECK(h.counts[1] == 1);
  const std::vector<double> ref{0.4, 0.2};
  CHECK(l1_distance(h, ref) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(uniform_grid(1.0, 0.3).back() == 1.0);
  CHECK(uniform_grid(1.0, 0.25).size() == 5);
}
