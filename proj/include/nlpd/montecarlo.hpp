#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "nlpd/bernstein.hpp"
#include "nlpd/pearson.hpp"

namespace nlpd::mc {

/// Path streams. Every path owns independent generators whose seeds are
/// derived from (master seed, path index, stream id), so results do not
/// depend on how paths are distributed over threads.
enum class Stream : std::uint64_t { Diffusion = 1, Clock = 2, Initial = 3 };

/// SplitMix64 finalizer applied to an advanced state.
std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t path, Stream stream);

using Engine = std::mt19937_64;

/// Worker count: explicit value if positive, else NLP_THREADS, else 1.
int resolve_threads(int requested);

enum class Scheme { Auto, Euler, Exact };
std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);

struct SimulationOptions {
  double dt = 1e-3;              // SDE step
  double dt_operational = 1e-3;  // subordinator grid step
  Scheme scheme = Scheme::Auto;  // Auto: exact for OU, Euler otherwise
  int threads = 0;
  bool stationary_start = false;  // x0 ~ m instead of a fixed point
};

struct Provenance {
  std::string process;  // "pearson", "inverse_subordinator" or "nonlocal"
  nlohmann::json family;  // null for inverse_subordinator
  nlohmann::json phi;     // null for pearson
  std::string scheme;
  double dt = 0.0;
  double dt_operational = 0.0;
  bool stationary_start = false;
  double x0 = 0.0;
  std::uint64_t boundary_events = 0;  // reflections at the boundary of E

  nlohmann::json to_json() const;
  static Provenance from_json(const nlohmann::json& j);
};

/// n_paths x time_grid.size() samples, stored row-major.
struct TrajectorySet {
  std::vector<double> time_grid;
  std::size_t n_paths = 0;
  std::vector<double> values;
  std::uint64_t master_seed = 0;
  Provenance provenance;

  double at(std::size_t path, std::size_t k) const { return values[path * time_grid.size() + k]; }
  double& at(std::size_t path, std::size_t k) { return values[path * time_grid.size() + k]; }
  /// Index of t in the grid; DomainError if absent.
  std::size_t index_of(double t) const;
  std::vector<double> column(std::size_t k) const;

  /// Writes <base>.bin (one little-endian float64 column per grid time) and
  /// <base>.json (grid, seed, provenance).
  void save(const std::filesystem::path& base) const;
  static TrajectorySet load(const std::filesystem::path& base);
};

/// {0, step, 2 step, ..., T}; T is appended if step does not divide it.
std::vector<double> uniform_grid(double T, double step);

/// Draws from the stationary law m: Gaussian (OU), Gamma (CIR), Beta
/// (Jacobi), F (FS) and inverse Gamma (RG) directly; Student by inverting a
/// tabulated distribution function.
class StationarySampler {
 public:
  explicit StationarySampler(const PearsonFamily& family);
  double operator()(Engine& rng) const;

 private:
  PearsonFamily family_;
  std::vector<double> cdf_, x_;  // Student only
};

/// Sample paths of the classical diffusion dX = mu(X) dt + sqrt(2 D(X)) dW.
/// Requires dt * theta < 0.1 for Euler steps.
TrajectorySet simulate_pearson(const PearsonFamily& family, double x0, std::span<const double> time_grid,
                               std::size_t n_paths, std::uint64_t seed, const SimulationOptions& options = {});

/// Inverse subordinator L(t) = inf{y : sigma(y) > t} on the observation grid,
/// from sigma sampled on an operational grid of step dt_operational.
TrajectorySet simulate_inverse_subordinator(const Bernstein& phi, std::span<const double> time_grid,
                                            std::size_t n_paths, std::uint64_t seed,
                                            const SimulationOptions& options = {});

/// X(L(t)) with X and L driven by independent streams.
TrajectorySet simulate_nonlocal(const PearsonFamily& family, const Bernstein& phi, double x0,
                                std::span<const double> time_grid, std::size_t n_paths, std::uint64_t seed,
                                const SimulationOptions& options = {});

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

Estimate estimate_mean(std::span<const double> samples);
Estimate estimate_mean(std::span<const double> samples, const std::function<double(double)>& g);

/// Corr(X(t), X(s)) across paths with a delete-a-group jackknife standard
/// error. Only meaningful for stationary starts; other provenance raises
/// ConfigError.
Estimate estimate_correlation(const TrajectorySet& ts, double t, double s, int groups = 100);

/// Pearson correlation with jackknife error for paired samples.
Estimate correlation(std::span<const double> a, std::span<const double> b, int groups = 100);

struct Histogram {
  double lo = 0.0, hi = 0.0;
  std::vector<std::size_t> counts;
  std::size_t below = 0, above = 0, total = 0;

  double width() const { return (hi - lo) / double(counts.size()); }
  double bin_lo(std::size_t i) const { return lo + width() * double(i); }
  double bin_hi(std::size_t i) const { return i + 1 == counts.size() ? hi : bin_lo(i + 1); }
  double density(std::size_t i) const { return double(counts[i]) / (double(total) * width()); }
};

Histogram histogram(std::span<const double> samples, double lo, double hi, std::size_t bins);

/// Reference probabilities of the histogram bins: int over each bin of a
/// density, by composite Simpson with `points` odd nodes per bin.
std::vector<double> bin_masses(const Histogram& h, const std::function<std::vector<double>(std::span<const double>)>& density,
                               int points = 9);

/// Total variation (L1) distance at bin resolution:
/// sum |empirical - reference| over bins plus the mismatch of the mass
/// outside [lo, hi].
double l1_distance(const Histogram& h, std::span<const double> reference);

}  // namespace nlpd::mc
