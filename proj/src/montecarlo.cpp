#include "nlpd/montecarlo.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <thread>

#include "nlpd/errors.hpp"

namespace nlpd::mc {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t path, Stream stream) {
  // Three chained SplitMix64 rounds; each input is mixed before the next is
  // added so nearby (path, stream) pairs land far apart.
  std::uint64_t s = master;
  std::uint64_t h = splitmix64(s);
  s = h ^ path;
  h = splitmix64(s);
  s = h ^ static_cast<std::uint64_t>(stream);
  return splitmix64(s);
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("NLP_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return int(v);
    throw ConfigError(std::string("NLP_THREADS must be a positive integer, got '") + env + "'");
  }
  return 1;
}

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::Auto: return "auto";
    case Scheme::Euler: return "euler";
    case Scheme::Exact: return "exact";
  }
  return "auto";
}

Scheme scheme_from_string(const std::string& s) {
  if (s == "auto") return Scheme::Auto;
  if (s == "euler") return Scheme::Euler;
  if (s == "exact") return Scheme::Exact;
  throw ConfigError("unknown scheme '" + s + "' (auto, euler, exact)");
}

namespace {

double uniform_open(Engine& rng) { return (double(rng() >> 11) + 0.5) * 0x1p-53; }

template <class F>
void parallel_for(std::size_t n, int threads, F&& body) {
  threads = std::max(1, std::min<int>(threads, int(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    body(0, std::size_t(0), n);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (int w = 0; w < threads; ++w) {
    const std::size_t a = n * w / threads, b = n * (w + 1) / threads;
    pool.emplace_back([&, w, a, b] {
      try {
        body(w, a, b);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void check_grid(std::span<const double> grid) {
  if (grid.empty() || grid.front() != 0.0) throw DomainError("time grid must start at 0");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1]) || !std::isfinite(grid[i]))
      throw DomainError("time grid must be finite and strictly increasing");
}

// Advances the diffusion over a time span, exactly for OU or by equal Euler
// substeps of length at most dt with full truncation and reflection at the
// boundary.
class Stepper {
 public:
  Stepper(const PearsonFamily& f, Scheme scheme, double dt) : f_(f), dt_(dt) {
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    if (scheme == Scheme::Auto) scheme = f.kind() == FamilyKind::OU ? Scheme::Exact : Scheme::Euler;
    if (scheme == Scheme::Exact && f.kind() != FamilyKind::OU)
      throw UnsupportedError("exact sampling is available for OU only; use the euler scheme");
    exact_ = scheme == Scheme::Exact;
    scheme_ = scheme;
    if (!exact_ && dt * f.theta() >= 0.1)
      throw ConfigError("Euler step too large: dt * theta = " + std::to_string(dt * f.theta()) + " >= 0.1");
    if (exact_) ou_ = std::get<OUParams>(f.params());
  }

  Scheme scheme() const { return scheme_; }

  double advance(double x, double h, Engine& rng, std::normal_distribution<double>& z,
                 std::uint64_t& events) const {
    if (h <= 0.0) return x;
    if (exact_) {
      const double e = std::exp(-ou_.theta * h);
      return ou_.mu + (x - ou_.mu) * e + ou_.sigma * std::sqrt(-std::expm1(-2.0 * ou_.theta * h)) * z(rng);
    }
    const long steps = std::max(1L, long(std::ceil(h / dt_ - 1e-9)));
    const double k = h / double(steps), sk = std::sqrt(2.0 * k);
    const double lo = f_.lower(), hi = f_.upper();
    for (long i = 0; i < steps; ++i) {
      const double xc = std::clamp(x, lo, hi);
      const double d = std::max(f_.diffusion(xc), 0.0);
      x = xc + f_.drift(xc) * k + sk * std::sqrt(d) * z(rng);
      if (x <= lo || x >= hi) {
        ++events;
        if (x <= lo) x = 2.0 * lo - x;
        if (x >= hi) x = 2.0 * hi - x;
        if (!(x > lo)) x = std::nextafter(lo, INFINITY);
        if (!(x < hi)) x = std::nextafter(hi, -INFINITY);
      }
    }
    return x;
  }

 private:
  const PearsonFamily& f_;
  double dt_;
  bool exact_ = false;
  Scheme scheme_ = Scheme::Euler;
  OUParams ou_{};
};

// Increments of the subordinator over an operational step dy.
class ClockIncrement {
 public:
  ClockIncrement(const Bernstein& phi, double dy) : kind_(phi.kind()), dy_(dy), gamma_(dy, 1.0) {
    if (!(dy > 0.0)) throw ConfigError("dt_operational must be positive");
    if (kind_ == BernsteinKind::Custom)
      throw UnsupportedError("no increment sampler for a custom Levy measure; use a catalogue Bernstein function");
    alpha_ = phi.alpha();
    theta_ = phi.theta();
    if (kind_ != BernsteinKind::Gamma) scale_ = std::pow(dy, 1.0 / alpha_);
  }

  // Drops any state cached by the distributions so each path depends only on
  // its own stream.
  void reset() { gamma_.reset(); }

  double operator()(Engine& rng) {
    switch (kind_) {
      case BernsteinKind::Stable: return scale_ * positive_stable(rng);
      case BernsteinKind::TemperedStable:
        for (;;) {
          const double s = scale_ * positive_stable(rng);
          if (uniform_open(rng) <= std::exp(-theta_ * s)) return s;
        }
      case BernsteinKind::GeometricStable: {
        const double g = gamma_(rng);
        return g == 0.0 ? 0.0 : std::pow(g, 1.0 / alpha_) * positive_stable(rng);
      }
      case BernsteinKind::Gamma: return gamma_(rng);
      case BernsteinKind::Custom: break;
    }
    return 0.0;
  }

 private:
  // Chambers-Mallows-Stuck (Kanter) draw with Laplace transform exp(-lambda^alpha).
  double positive_stable(Engine& rng) const {
    const double u = std::numbers::pi * uniform_open(rng);
    const double e = -std::log(uniform_open(rng));
    const double a = alpha_;
    const double log_s = std::log(std::sin(a * u)) - std::log(std::sin(u)) / a +
                         (1.0 - a) / a * (std::log(std::sin((1.0 - a) * u)) - std::log(e));
    return std::exp(log_s);
  }

  BernsteinKind kind_;
  double dy_, alpha_ = 0.0, theta_ = 0.0, scale_ = 1.0;
  std::gamma_distribution<double> gamma_;
};

// L(t_k) for one path: the last operational grid point y with sigma(y) <= t_k,
// so L(0) = 0 exactly and L is within one operational step below the exact
// first-passage time.
void clock_path(ClockIncrement& inc, double dy, std::span<const double> grid, Engine& rng, double* out) {
  constexpr double kMaxSteps = 1e9;
  inc.reset();
  double sigma = 0.0, steps = 0.0;
  double pending = inc(rng);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    // Increments that underflow to zero must not move the clock at t = 0.
    if (grid[k] == 0.0) {
      out[k] = 0.0;
      continue;
    }
    while (sigma + pending <= grid[k]) {
      sigma += pending;
      steps += 1.0;
      if (steps > kMaxSteps) throw NumericFailure("inverse subordinator: operational step budget exhausted");
      pending = inc(rng);
    }
    out[k] = steps * dy;
  }
}

Provenance make_provenance(std::string process, const SimulationOptions& o) {
  Provenance p;
  p.process = std::move(process);
  p.dt = o.dt;
  p.dt_operational = o.dt_operational;
  p.stationary_start = o.stationary_start;
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------

nlohmann::json Provenance::to_json() const {
  return {{"process", process}, {"family", family},       {"phi", phi},
          {"scheme", scheme},   {"dt", dt},               {"dt_operational", dt_operational},
          {"stationary_start", stationary_start}, {"x0", x0}, {"boundary_events", boundary_events}};
}

Provenance Provenance::from_json(const nlohmann::json& j) {
  Provenance p;
  try {
    p.process = j.at("process").get<std::string>();
    p.family = j.at("family");
    p.phi = j.at("phi");
    p.scheme = j.at("scheme").get<std::string>();
    p.dt = j.at("dt").get<double>();
    p.dt_operational = j.at("dt_operational").get<double>();
    p.stationary_start = j.at("stationary_start").get<bool>();
    p.x0 = j.at("x0").get<double>();
    p.boundary_events = j.at("boundary_events").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("trajectory sidecar: ") + e.what());
  }
  return p;
}

std::size_t TrajectorySet::index_of(double t) const {
  const auto it = std::lower_bound(time_grid.begin(), time_grid.end(), t);
  if (it == time_grid.end() || std::abs(*it - t) > 1e-12 * std::max(1.0, std::abs(t))) {
    if (it != time_grid.begin() && std::abs(*(it - 1) - t) <= 1e-12 * std::max(1.0, std::abs(t)))
      return std::size_t(it - 1 - time_grid.begin());
    throw DomainError("time " + std::to_string(t) + " is not on the trajectory grid");
  }
  return std::size_t(it - time_grid.begin());
}

std::vector<double> TrajectorySet::column(std::size_t k) const {
  std::vector<double> c(n_paths);
  for (std::size_t i = 0; i < n_paths; ++i) c[i] = at(i, k);
  return c;
}

void TrajectorySet::save(const std::filesystem::path& base) const {
  static_assert(std::endian::native == std::endian::little, "trajectory files are little-endian");
  auto bin = base;
  bin += ".bin";
  std::ofstream out(bin, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + bin.string());
  for (std::size_t k = 0; k < time_grid.size(); ++k) {
    const auto c = column(k);
    out.write(reinterpret_cast<const char*>(c.data()), std::streamsize(c.size() * sizeof(double)));
  }
  auto side = base;
  side += ".json";
  std::ofstream js(side);
  if (!js) throw ConfigError("cannot write " + side.string());
  const nlohmann::json j = {{"format", "nlpd-trajectories"},
                            {"version", 1},
                            {"layout", "columnar float64 little-endian, one column per grid time"},
                            {"n_paths", n_paths},
                            {"time_grid", time_grid},
                            {"master_seed", master_seed},
                            {"provenance", provenance.to_json()}};
  js << j.dump(2) << '\n';
}

TrajectorySet TrajectorySet::load(const std::filesystem::path& base) {
  auto side = base;
  side += ".json";
  std::ifstream js(side);
  if (!js) throw ConfigError("cannot read " + side.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(js);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("trajectory sidecar: ") + e.what());
  }
  TrajectorySet ts;
  try {
    if (j.at("format") != "nlpd-trajectories") throw ConfigError("trajectory sidecar: unknown format");
    ts.n_paths = j.at("n_paths").get<std::size_t>();
    ts.time_grid = j.at("time_grid").get<std::vector<double>>();
    ts.master_seed = j.at("master_seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("trajectory sidecar: ") + e.what());
  }
  ts.provenance = Provenance::from_json(j.at("provenance"));
  auto bin = base;
  bin += ".bin";
  std::ifstream in(bin, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + bin.string());
  ts.values.assign(ts.n_paths * ts.time_grid.size(), 0.0);
  std::vector<double> c(ts.n_paths);
  for (std::size_t k = 0; k < ts.time_grid.size(); ++k) {
    in.read(reinterpret_cast<char*>(c.data()), std::streamsize(c.size() * sizeof(double)));
    if (!in) throw ConfigError("trajectory file " + bin.string() + " is truncated");
    for (std::size_t i = 0; i < ts.n_paths; ++i) ts.at(i, k) = c[i];
  }
  return ts;
}

std::vector<double> uniform_grid(double T, double step) {
  if (!(T >= 0.0) || !(step > 0.0)) throw DomainError("uniform_grid: need T >= 0 and step > 0");
  std::vector<double> g;
  const auto n = static_cast<std::size_t>(std::floor(T / step + 1e-9));
  for (std::size_t k = 0; k <= n; ++k) g.push_back(std::min(T, double(k) * step));
  if (T - g.back() > 1e-12 * std::max(1.0, T)) g.push_back(T);
  return g;
}

// ---------------------------------------------------------------------------

StationarySampler::StationarySampler(const PearsonFamily& family) : family_(family) {
  if (family.kind() != FamilyKind::Student) return;
  // Distribution function on x = c + s sinh(u), |x - c| <= 1e8 s, from 5-point
  // Gauss-Legendre cells. Renormalizing by the total folds the tail mass
  // beyond the table (polynomially small in 1e-8) into the interior.
  const double c = family.center(), s = family.scale();
  const double U = std::asinh(1e8), du = 0.004;
  static constexpr double gx[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                   0.9061798459386640};
  static constexpr double gw[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                   0.4786286704993665, 0.2369268850561891};
  const int cells = int(std::ceil(2.0 * U / du));
  x_.reserve(cells + 1);
  cdf_.reserve(cells + 1);
  double acc = 0.0;
  for (int i = 0; i <= cells; ++i) {
    const double u = -U + 2.0 * U * i / cells;
    x_.push_back(c + s * std::sinh(u));
    cdf_.push_back(acc);
    if (i == cells) break;
    const double h = 2.0 * U / cells, mid = u + 0.5 * h;
    for (int g = 0; g < 5; ++g) {
      const double v = mid + 0.5 * h * gx[g];
      acc += 0.5 * h * gw[g] * s * std::cosh(v) * family.stationary_density(c + s * std::sinh(v));
    }
  }
  for (double& v : cdf_) v /= acc;
}

double StationarySampler::operator()(Engine& rng) const {
  switch (family_.kind()) {
    case FamilyKind::OU: {
      const auto& p = std::get<OUParams>(family_.params());
      return p.mu + p.sigma * std::normal_distribution<double>()(rng);
    }
    case FamilyKind::CIR: {
      const auto& p = std::get<CIRParams>(family_.params());
      return std::gamma_distribution<double>(p.b, 1.0 / p.a)(rng);
    }
    case FamilyKind::Jacobi: {
      // m(x) proportional to (1 - x)^a (1 + x)^b, so (1 + X)/2 ~ Beta(b + 1, a + 1).
      const auto& p = std::get<JacobiParams>(family_.params());
      const double g1 = std::gamma_distribution<double>(p.b + 1.0, 1.0)(rng);
      const double g2 = std::gamma_distribution<double>(p.a + 1.0, 1.0)(rng);
      const double x = 2.0 * g1 / (g1 + g2) - 1.0;
      return std::clamp(x, std::nextafter(-1.0, 0.0), std::nextafter(1.0, 0.0));
    }
    case FamilyKind::FisherSnedecor: {
      const auto& p = std::get<FSParams>(family_.params());
      const double c1 = std::chi_squared_distribution<double>(p.alpha)(rng);
      const double c2 = std::chi_squared_distribution<double>(p.beta)(rng);
      return std::max((c1 / p.alpha) / (c2 / p.beta), std::numeric_limits<double>::min());
    }
    case FamilyKind::ReciprocalGamma: {
      const auto& p = std::get<RGParams>(family_.params());
      return 1.0 / std::gamma_distribution<double>(p.beta, 1.0 / p.alpha)(rng);
    }
    case FamilyKind::Student: {
      const double u = uniform_open(rng);
      const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
      const std::size_t i = std::clamp<std::size_t>(std::size_t(it - cdf_.begin()), 1, cdf_.size() - 1);
      const double w = (u - cdf_[i - 1]) / std::max(cdf_[i] - cdf_[i - 1], 1e-300);
      return x_[i - 1] + w * (x_[i] - x_[i - 1]);
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------

TrajectorySet simulate_pearson(const PearsonFamily& family, double x0, std::span<const double> time_grid,
                               std::size_t n_paths, std::uint64_t seed, const SimulationOptions& options) {
  check_grid(time_grid);
  if (!options.stationary_start && !family.contains(x0)) throw DomainError("x0 outside the state space");
  const Stepper stepper(family, options.scheme, options.dt);
  const StationarySampler initial(family);

  TrajectorySet ts;
  ts.time_grid.assign(time_grid.begin(), time_grid.end());
  ts.n_paths = n_paths;
  ts.values.assign(n_paths * time_grid.size(), 0.0);
  ts.master_seed = seed;
  ts.provenance = make_provenance("pearson", options);
  ts.provenance.family = family.to_json();
  ts.provenance.scheme = to_string(stepper.scheme());
  ts.provenance.x0 = x0;

  const int threads = resolve_threads(options.threads);
  std::vector<std::uint64_t> events(threads, 0);
  parallel_for(n_paths, threads, [&](int w, std::size_t a, std::size_t b) {
    for (std::size_t i = a; i < b; ++i) {
      Engine rx(derive_seed(seed, i, Stream::Diffusion));
      std::normal_distribution<double> z;
      double x = x0;
      if (options.stationary_start) {
        Engine r0(derive_seed(seed, i, Stream::Initial));
        x = initial(r0);
      }
      ts.at(i, 0) = x;
      for (std::size_t k = 1; k < time_grid.size(); ++k) {
        x = stepper.advance(x, time_grid[k] - time_grid[k - 1], rx, z, events[w]);
        ts.at(i, k) = x;
      }
    }
  });
  for (auto e : events) ts.provenance.boundary_events += e;
  return ts;
}

TrajectorySet simulate_inverse_subordinator(const Bernstein& phi, std::span<const double> time_grid,
                                            std::size_t n_paths, std::uint64_t seed,
                                            const SimulationOptions& options) {
  check_grid(time_grid);
  ClockIncrement probe(phi, options.dt_operational);  // validates before spawning workers
  (void)probe;

  TrajectorySet ts;
  ts.time_grid.assign(time_grid.begin(), time_grid.end());
  ts.n_paths = n_paths;
  ts.values.assign(n_paths * time_grid.size(), 0.0);
  ts.master_seed = seed;
  ts.provenance = make_provenance("inverse_subordinator", options);
  ts.provenance.phi = phi.to_json();
  ts.provenance.scheme = "operational-grid";
  ts.provenance.stationary_start = false;

  parallel_for(n_paths, resolve_threads(options.threads), [&](int, std::size_t a, std::size_t b) {
    ClockIncrement inc(phi, options.dt_operational);
    for (std::size_t i = a; i < b; ++i) {
      Engine rl(derive_seed(seed, i, Stream::Clock));
      clock_path(inc, options.dt_operational, time_grid, rl, &ts.at(i, 0));
    }
  });
  return ts;
}

TrajectorySet simulate_nonlocal(const PearsonFamily& family, const Bernstein& phi, double x0,
                                std::span<const double> time_grid, std::size_t n_paths, std::uint64_t seed,
                                const SimulationOptions& options) {
  check_grid(time_grid);
  if (!options.stationary_start && !family.contains(x0)) throw DomainError("x0 outside the state space");
  const Stepper stepper(family, options.scheme, options.dt);
  ClockIncrement probe(phi, options.dt_operational);
  (void)probe;
  const StationarySampler initial(family);

  TrajectorySet ts;
  ts.time_grid.assign(time_grid.begin(), time_grid.end());
  ts.n_paths = n_paths;
  ts.values.assign(n_paths * time_grid.size(), 0.0);
  ts.master_seed = seed;
  ts.provenance = make_provenance("nonlocal", options);
  ts.provenance.family = family.to_json();
  ts.provenance.phi = phi.to_json();
  ts.provenance.scheme = to_string(stepper.scheme());
  ts.provenance.x0 = x0;

  const int threads = resolve_threads(options.threads);
  std::vector<std::uint64_t> events(threads, 0);
  parallel_for(n_paths, threads, [&](int w, std::size_t a, std::size_t b) {
    ClockIncrement inc(phi, options.dt_operational);
    std::vector<double> L(time_grid.size());
    for (std::size_t i = a; i < b; ++i) {
      Engine rl(derive_seed(seed, i, Stream::Clock));
      clock_path(inc, options.dt_operational, time_grid, rl, L.data());
      Engine rx(derive_seed(seed, i, Stream::Diffusion));
      std::normal_distribution<double> z;
      double x = x0;
      if (options.stationary_start) {
        Engine r0(derive_seed(seed, i, Stream::Initial));
        x = initial(r0);
      }
      // L is nondecreasing, so one forward pass of X visits every L(t_k).
      ts.at(i, 0) = x;
      for (std::size_t k = 1; k < time_grid.size(); ++k) {
        x = stepper.advance(x, L[k] - L[k - 1], rx, z, events[w]);
        ts.at(i, k) = x;
      }
    }
  });
  for (auto e : events) ts.provenance.boundary_events += e;
  return ts;
}

// ---------------------------------------------------------------------------

Estimate estimate_mean(std::span<const double> samples) {
  return estimate_mean(samples, [](double x) { return x; });
}

Estimate estimate_mean(std::span<const double> samples, const std::function<double(double)>& g) {
  if (samples.size() < 2) throw DomainError("estimate_mean: need at least two samples");
  double mean = 0.0, m2 = 0.0;
  std::size_t n = 0;
  for (double x : samples) {
    const double v = g(x);
    ++n;
    const double d = v - mean;
    mean += d / double(n);
    m2 += d * (v - mean);
  }
  return {mean, std::sqrt(m2 / double(n - 1) / double(n))};
}

Estimate correlation(std::span<const double> a, std::span<const double> b, int groups) {
  const std::size_t n = a.size();
  if (b.size() != n || n < 4) throw DomainError("correlation: need paired samples (at least 4)");
  groups = std::clamp<int>(groups, 2, int(n));
  struct Sums {
    double n = 0, a = 0, b = 0, aa = 0, bb = 0, ab = 0;
  };
  // Centre on the first pair to limit cancellation in the raw moments.
  const double ca = a[0], cb = b[0];
  std::vector<Sums> g(groups);
  Sums tot;
  for (std::size_t i = 0; i < n; ++i) {
    auto& s = g[i * std::size_t(groups) / n];
    const double x = a[i] - ca, y = b[i] - cb;
    s.n += 1;
    s.a += x;
    s.b += y;
    s.aa += x * x;
    s.bb += y * y;
    s.ab += x * y;
  }
  for (const auto& s : g) {
    tot.n += s.n;
    tot.a += s.a;
    tot.b += s.b;
    tot.aa += s.aa;
    tot.bb += s.bb;
    tot.ab += s.ab;
  }
  auto corr = [](const Sums& s) {
    const double va = s.aa - s.a * s.a / s.n, vb = s.bb - s.b * s.b / s.n, cab = s.ab - s.a * s.b / s.n;
    if (!(va > 0.0) || !(vb > 0.0)) throw NumericFailure("correlation: degenerate sample (zero variance)");
    return cab / std::sqrt(va * vb);
  };
  const double r = corr(tot);
  std::vector<double> loo(groups);
  double mean = 0.0;
  for (int k = 0; k < groups; ++k) {
    Sums s = tot;
    s.n -= g[k].n;
    s.a -= g[k].a;
    s.b -= g[k].b;
    s.aa -= g[k].aa;
    s.bb -= g[k].bb;
    s.ab -= g[k].ab;
    loo[k] = corr(s);
    mean += loo[k] / groups;
  }
  double ss = 0.0;
  for (double v : loo) ss += (v - mean) * (v - mean);
  return {r, std::sqrt(double(groups - 1) / groups * ss)};
}

Estimate estimate_correlation(const TrajectorySet& ts, double t, double s, int groups) {
  if (ts.provenance.process == "inverse_subordinator" || !ts.provenance.stationary_start)
    throw ConfigError(
        "estimate_correlation: the trajectories were not started from the stationary law; "
        "simulate with stationary_start");
  if (!(t >= s && s >= 0.0)) throw DomainError("estimate_correlation: need t >= s >= 0");
  const auto a = ts.column(ts.index_of(t));
  const auto b = ts.column(ts.index_of(s));
  if (t == s) return {1.0, 0.0};
  return correlation(a, b, groups);
}

Histogram histogram(std::span<const double> samples, double lo, double hi, std::size_t bins) {
  if (!(hi > lo) || bins == 0) throw DomainError("histogram: need lo < hi and at least one bin");
  Histogram h;
  h.lo = lo;
  h.hi = hi;
  h.counts.assign(bins, 0);
  const double w = (hi - lo) / double(bins);
  for (double x : samples) {
    ++h.total;
    if (x < lo) {
      ++h.below;
    } else if (x > hi) {
      ++h.above;
    } else {
      const auto i = std::min(bins - 1, static_cast<std::size_t>((x - lo) / w));
      ++h.counts[i];
    }
  }
  return h;
}

std::vector<double> bin_masses(const Histogram& h,
                               const std::function<std::vector<double>(std::span<const double>)>& density,
                               int points) {
  if (points < 3 || points % 2 == 0) throw DomainError("bin_masses: points must be odd and >= 3");
  const std::size_t bins = h.counts.size(), per = std::size_t(points - 1);
  std::vector<double> xs(bins * per + 1);
  for (std::size_t j = 0; j < xs.size(); ++j) xs[j] = h.lo + (h.hi - h.lo) * double(j) / double(xs.size() - 1);
  const auto p = density(xs);
  if (p.size() != xs.size()) throw DomainError("bin_masses: density returned the wrong number of values");
  const double step = (h.hi - h.lo) / double(xs.size() - 1);
  std::vector<double> out(bins, 0.0);
  for (std::size_t i = 0; i < bins; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j <= per; ++j) {
      const double w = (j == 0 || j == per) ? 1.0 : (j % 2 ? 4.0 : 2.0);
      s += w * p[i * per + j];
    }
    out[i] = s * step / 3.0;
  }
  return out;
}

double l1_distance(const Histogram& h, std::span<const double> reference) {
  if (reference.size() != h.counts.size()) throw DomainError("l1_distance: reference size mismatch");
  if (h.total == 0) throw DomainError("l1_distance: empty histogram");
  double d = 0.0, inside = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    d += std::abs(double(h.counts[i]) / double(h.total) - reference[i]);
    inside += reference[i];
  }
  d += std::abs(double(h.below + h.above) / double(h.total) - std::max(0.0, 1.0 - inside));
  return d;
}

}  // namespace nlpd::mc
