#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

namespace nlpd::cli {

struct NumericOptions {
  int n_trunc = 0;               // 0: module default (60 OU/CIR, 40 Jacobi, N_j otherwise)
  int n_trunc_max = 0;           // 0: 16 x default
  double truncation_tol = 1e-6;
  double continuous_tol = 1e-7;
  double tail_tol = 1e-6;        // datum expansion L2 tail
  double dt = 1e-3;
  double dt_operational = 1e-3;
  std::string scheme = "auto";
  std::size_t paths = 10000;
  std::size_t bins = 40;
  std::vector<double> x_range;   // [lo, hi] for histograms; empty selects the sample range
  bool stationary_start = false;

  nlohmann::json to_json() const;
  static NumericOptions from_json(const nlohmann::json& j);
};

/// Everything a single invocation needs. Parsing rejects unknown keys at every
/// level, and to_json writes every field so a dumped job re-parses to itself.
struct Job {
  std::string command;           // phi-eval, relax, density, solve, simulate, correlation, classify
  nlohmann::json family = {{"kind", "ou"}, {"theta", 1.0}, {"mu", 0.0}, {"sigma", 1.0}};
  nlohmann::json phi = {{"kind", "stable"}, {"alpha", 0.5}};  // null: classical dynamics
  nlohmann::json datum;          // solve: descriptor object or "Q<n>"
  std::string mode = "backward"; // solve: backward | forward
  std::string process = "auto";  // simulate: auto | pearson | inverse_subordinator | nonlocal
  std::vector<double> t, x, lambda, s;
  std::optional<double> x0;
  NumericOptions numeric;
  std::uint64_t seed = 1;
  int threads = 0;               // 0: NLP_THREADS or 1
  std::string output = "-";
  std::string trajectories;      // simulate: base path for the binary file and sidecar

  nlohmann::json to_json() const;
  static Job from_json(const nlohmann::json& j);
};

/// A grid given as a number, an array of numbers, or "a:b:n" (n equally
/// spaced points from a to b inclusive).
std::vector<double> parse_grid(const nlohmann::json& grid);

/// Runs the job and returns its CSV (or plain text for classify).
/// Diagnostics go to `log`.
std::string execute(const Job& job, std::ostream& log);

/// Exit status for an exception escaping execute(): 2 configuration or input,
/// 3 numerical failure, 4 spectrum bound or domain, 1 anything else.
int exit_code(const std::exception& e);

/// Full command-line entry point. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Formats one CSV number: 17 significant digits, '.' separator.
std::string format_number(double v);

}  // namespace nlpd::cli
