#include "nlpd/laplace.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "nlpd/errors.hpp"

namespace nlpd::laplace {

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> stehfest_weights(int N) {
  const int h = N / 2;
  auto fact = [](int n) { return std::tgamma(n + 1.0); };
  std::vector<double> v(N + 1, 0.0);
  for (int k = 1; k <= N; ++k) {
    double s = 0.0;
    for (int j = (k + 1) / 2; j <= std::min(k, h); ++j) {
      s += std::pow(j, h) * fact(2 * j) /
           (fact(h - j) * fact(j) * fact(j - 1) * fact(k - j) * fact(2 * j - k));
    }
    v[k] = ((k + h) % 2 == 0 ? 1.0 : -1.0) * s;
  }
  return v;
}

}  // namespace

double talbot(const Transform& F, double t, int M) {
  if (!(t > 0.0)) throw DomainError("talbot: t must be positive");
  const double r = 2.0 * M / (5.0 * t);
  double sum = 0.5 * std::exp(r * t) * F(cplx(r, 0.0)).real();
  for (int k = 1; k < M; ++k) {
    const double th = k * kPi / M;
    const double cot = std::cos(th) / std::sin(th);
    const cplx s(r * th * cot, r * th);
    const double sigma = th + (th * cot - 1.0) * cot;
    sum += (std::exp(t * s) * F(s) * cplx(1.0, sigma)).real();
  }
  return r / M * sum;
}

double stehfest(const Transform& F, double t, int N) {
  if (!(t > 0.0)) throw DomainError("stehfest: t must be positive");
  if (N % 2 != 0) throw DomainError("stehfest: N must be even");
  thread_local int cached_n = 0;
  thread_local std::vector<double> w;
  if (cached_n != N) {
    w = stehfest_weights(N);
    cached_n = N;
  }
  const double ln2t = std::numbers::ln2 / t;
  double sum = 0.0;
  for (int k = 1; k <= N; ++k) sum += w[k] * F(cplx(k * ln2t, 0.0)).real();
  return ln2t * sum;
}

double hyperbola(const Transform& F, double t, double sector, double tol) {
  if (!(t > 0.0)) throw DomainError("hyperbola: t must be positive");
  if (!(sector > 0.0)) throw DomainError("hyperbola: sector must be positive");
  sector = std::min(sector, 1.4);
  // Strip of analyticity |Im u| < d maps between the hyperbolas with
  // parameters a - d = 0 and a + d = sector.
  const double a = 0.5 * sector, d = 0.5 * sector;
  const double eps = 1e-16;
  const double P = std::log(tol / eps);  // mu * t, caps round-off growth e^{mu t}
  const double mu = P / t;
  const double log_tol = -std::log(tol);
  const double h = 2.0 * kPi * d / (P + log_tol);
  const double u_max = std::acosh((1.0 + log_tol / P) / std::sin(a));
  const int N = static_cast<int>(std::ceil(u_max / h));
  auto term = [&](double u) {
    const cplx w(-a, u);  // i u - a
    const cplx z = mu * (1.0 + std::sin(w));
    const cplx dz = cplx(0.0, mu) * std::cos(w);
    return (std::exp(z * t) * F(z) * dz).imag();
  };
  double sum = 0.5 * term(0.0);
  for (int k = 1; k <= N; ++k) sum += term(k * h);
  return h / kPi * sum;
}

double invert(const Transform& F, double t, const Options& o) {
  const double v = (o.method == Method::Talbot) ? talbot(F, t, o.talbot_nodes)
                                                : hyperbola(F, t, o.sector);
  if (!std::isfinite(v)) throw NumericFailure("laplace inversion produced a non-finite value");
  if (o.cross_check > 0.0) {
    const double g = stehfest(F, t, o.stehfest_terms);
    if (std::abs(g - v) > o.cross_check * std::max(1.0, std::abs(v))) {
      std::ostringstream msg;
      msg.precision(10);
      msg << "laplace inversion disagreement at t=" << t << ": contour=" << v
          << " stehfest=" << g;
      throw NumericFailure(msg.str());
    }
  }
  return v;
}

}  // namespace nlpd::laplace
