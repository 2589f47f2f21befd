#include "nlpd/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "nlpd/bernstein.hpp"
#include "nlpd/errors.hpp"
#include "nlpd/montecarlo.hpp"
#include "nlpd/pearson.hpp"
#include "nlpd/relaxation.hpp"
#include "nlpd/solver.hpp"
#include "nlpd/spectral.hpp"
#include "nlpd/subordination.hpp"

namespace nlpd::cli {

using nlohmann::json;

namespace {

const std::set<std::string> kCommands{"phi-eval", "relax", "density", "solve", "simulate", "correlation", "classify"};

void reject_unknown(const json& j, const char* where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

class Csv {
 public:
  explicit Csv(std::initializer_list<const char*> columns) {
    bool first = true;
    for (const char* c : columns) {
      if (!first) text_ += ',';
      text_ += c;
      first = false;
    }
    text_ += '\n';
  }
  void row(std::initializer_list<double> values) {
    bool first = true;
    for (double v : values) {
      if (!first) text_ += ',';
      text_ += format_number(v);
      first = false;
    }
    text_ += '\n';
  }
  std::string str() && { return std::move(text_); }

 private:
  std::string text_;
};

std::optional<Bernstein> make_phi(const Job& job) {
  if (job.phi.is_null()) return std::nullopt;
  return Bernstein::from_json(job.phi);
}

Bernstein require_phi(const Job& job) {
  auto phi = make_phi(job);
  if (!phi) throw ConfigError(job.command + ": a Bernstein function (--phi) is required");
  return *phi;
}

void require_grid(const std::vector<double>& g, const char* name, const std::string& command) {
  if (g.empty()) throw ConfigError(command + ": the " + name + " grid is empty");
}

double require_x0(const Job& job) {
  if (!job.x0) throw ConfigError(job.command + ": x0 is required");
  return *job.x0;
}

// 41 points covering the bulk of the stationary law, inside E.
std::vector<double> default_x_grid(const PearsonFamily& f) {
  double a, b;
  if (f.kind() == FamilyKind::Jacobi) {
    a = -0.95;
    b = 0.95;
  } else if (f.lower() == 0.0) {
    a = 0.05 * f.scale();
    b = f.center() + 4.0 * f.scale();
  } else {
    a = f.center() - 4.0 * f.scale();
    b = f.center() + 4.0 * f.scale();
  }
  std::vector<double> g(41);
  for (int i = 0; i <= 40; ++i) g[i] = a + (b - a) * i / 40.0;
  g.back() = b;
  return g;
}

SpectralOptions spectral_options(const NumericOptions& n) {
  SpectralOptions o;
  o.n_trunc = n.n_trunc;
  o.n_trunc_max = n.n_trunc_max;
  o.truncation_tol = n.truncation_tol;
  o.continuous_tol = n.continuous_tol;
  return o;
}

mc::SimulationOptions simulation_options(const Job& job) {
  mc::SimulationOptions o;
  o.dt = job.numeric.dt;
  o.dt_operational = job.numeric.dt_operational;
  o.scheme = mc::scheme_from_string(job.numeric.scheme);
  o.threads = job.threads;
  o.stationary_start = job.numeric.stationary_start;
  return o;
}

std::vector<double> simulation_grid(std::initializer_list<const std::vector<double>*> grids) {
  std::vector<double> g{0.0};
  for (const auto* v : grids)
    for (double t : *v) {
      if (!(t >= 0.0) || !std::isfinite(t)) throw ConfigError("simulation times must be finite and nonnegative");
      g.push_back(t);
    }
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

Datum resolve_datum(const Job& job, const PearsonFamily& family, SolutionKind mode) {
  if (job.datum.is_null()) throw ConfigError("solve: a datum is required");
  if (job.datum.is_string()) {
    const std::string s = job.datum.get<std::string>();
    int n = -1;
    if (s.size() >= 2 && (s[0] == 'Q' || s[0] == 'q')) {
      const auto [p, ec] = std::from_chars(s.data() + 1, s.data() + s.size(), n);
      if (ec != std::errc() || p != s.data() + s.size()) n = -1;
    }
    if (n < 0) throw ConfigError("solve: datum shorthand must be Q<n>, got '" + s + "'");
    const PolynomialSystem polys(family, n);
    auto c = polys.polynomial(n).c;
    return mode == SolutionKind::Backward ? Datum::polynomial(std::move(c))
                                          : Datum::stationary_polynomial(std::move(c));
  }
  return Datum::from_json(job.datum);
}

std::string run_phi_eval(const Job& job) {
  const auto phi = require_phi(job);
  require_grid(job.lambda, "lambda", job.command);
  Csv csv{"lambda", "phi"};
  for (double l : job.lambda) csv.row({l, phi.phi(l)});
  return std::move(csv).str();
}

std::string run_relax(const Job& job) {
  const RelaxationEvaluator relax(require_phi(job));
  require_grid(job.t, "t", job.command);
  require_grid(job.lambda, "lambda", job.command);
  Csv csv{"t", "lambda", "value"};
  for (double t : job.t)
    for (double l : job.lambda) csv.row({t, l, relax(t, l)});
  return std::move(csv).str();
}

std::string run_density(const Job& job, std::ostream& log) {
  const auto family = PearsonFamily::from_json(job.family);
  const auto phi = make_phi(job);
  const double x0 = require_x0(job);
  require_grid(job.t, "t", job.command);
  const auto xs = job.x.empty() ? default_x_grid(family) : job.x;
  const SpectralExpansion se(family, phi, spectral_options(job.numeric));
  Csv csv{"t", "x", "x0", "value", "abs_err_bound"};
  std::size_t clamped = 0;
  double worst = 0.0;
  bool omitted = false;
  for (double t : job.t) {
    const auto v = phi ? se.nonlocal_transition_density(t, xs, x0) : se.transition_density(t, xs, x0);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      csv.row({t, xs[i], x0, v[i].value, v[i].error_bound});
      if (v[i].clamped) {
        ++clamped;
        worst = std::min(worst, v[i].raw);
      }
      omitted = omitted || v[i].continuous_part_omitted;
    }
  }
  if (clamped > 0)
    log << "note: " << clamped << " slightly negative values clamped to 0 (most negative " << format_number(worst)
        << ")\n";
  if (omitted)
    log << "warning: " << family.name()
        << " has a continuous spectrum whose eigenfunctions are not evaluated; values are the discrete part only\n";
  return std::move(csv).str();
}

std::string run_solve(const Job& job, std::ostream& log) {
  const auto family = PearsonFamily::from_json(job.family);
  SolutionKind mode;
  if (job.mode == "backward")
    mode = SolutionKind::Backward;
  else if (job.mode == "forward")
    mode = SolutionKind::Forward;
  else
    throw ConfigError("solve: mode must be backward or forward, got '" + job.mode + "'");
  const auto datum = resolve_datum(job, family, mode);
  require_grid(job.t, "t", job.command);
  const auto xs = job.x.empty() ? default_x_grid(family) : job.x;
  ExpandOptions eo;
  eo.n = job.numeric.n_trunc > 0 ? job.numeric.n_trunc : -1;
  eo.tail_tol = job.numeric.tail_tol;
  auto expansion = expand(family, datum, mode, eo);
  log << "expansion: N = " << expansion.n() << ", L2 tail = " << format_number(expansion.l2_tail) << "\n";
  const SolutionField field(family, std::move(expansion), require_phi(job));
  Csv csv{"t", "x", "value"};
  for (double t : job.t) {
    const auto factors = field.relaxation_factors(t);
    for (double x : xs) csv.row({t, x, field.evaluate(factors, x)});
  }
  return std::move(csv).str();
}

std::string run_simulate(const Job& job, std::ostream& log) {
  require_grid(job.t, "t", job.command);
  const auto phi = make_phi(job);
  std::string process = job.process;
  if (process == "auto") process = phi ? "nonlocal" : "pearson";
  const auto grid = simulation_grid({&job.t});
  const auto opts = simulation_options(job);
  mc::TrajectorySet ts;
  if (process == "inverse_subordinator") {
    if (!phi) throw ConfigError("simulate: the inverse subordinator needs --phi");
    ts = mc::simulate_inverse_subordinator(*phi, grid, job.numeric.paths, job.seed, opts);
  } else {
    const auto family = PearsonFamily::from_json(job.family);
    const double x0 = job.numeric.stationary_start ? job.x0.value_or(0.0) : require_x0(job);
    if (process == "pearson")
      ts = mc::simulate_pearson(family, x0, grid, job.numeric.paths, job.seed, opts);
    else if (process == "nonlocal") {
      if (!phi) throw ConfigError("simulate: the nonlocal process needs --phi");
      ts = mc::simulate_nonlocal(family, *phi, x0, grid, job.numeric.paths, job.seed, opts);
    } else {
      throw ConfigError("simulate: unknown process '" + process + "'");
    }
  }
  if (ts.provenance.boundary_events > 0)
    log << "note: " << ts.provenance.boundary_events << " Euler steps reflected at the boundary\n";
  if (!job.trajectories.empty()) ts.save(job.trajectories);

  if (job.numeric.bins == 0) throw ConfigError("simulate: bins must be positive");
  if (!job.numeric.x_range.empty() && job.numeric.x_range.size() != 2)
    throw ConfigError("simulate: x_range must be [lo, hi]");
  Csv csv{"t", "bin_lo", "bin_hi", "probability", "density"};
  for (double t : job.t) {
    const auto col = ts.column(ts.index_of(t));
    double lo, hi;
    if (job.numeric.x_range.size() == 2) {
      lo = job.numeric.x_range[0];
      hi = job.numeric.x_range[1];
    } else {
      const auto [mn, mx] = std::minmax_element(col.begin(), col.end());
      lo = *mn;
      hi = *mx;
      if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
      }
    }
    const auto h = mc::histogram(col, lo, hi, job.numeric.bins);
    for (std::size_t i = 0; i < h.counts.size(); ++i)
      csv.row({t, h.bin_lo(i), h.bin_hi(i), double(h.counts[i]) / double(h.total), h.density(i)});
    if (h.below + h.above > 0)
      log << "note: t = " << format_number(t) << ": " << (h.below + h.above) << " samples outside the histogram\n";
  }
  return std::move(csv).str();
}

std::string run_correlation(const Job& job) {
  require_grid(job.t, "t", job.command);
  const auto family = PearsonFamily::from_json(job.family);
  const auto phi = make_phi(job);
  const std::vector<double> s = job.s.empty() ? std::vector<double>{0.0} : job.s;
  const auto grid = simulation_grid({&job.t, &s});
  auto opts = simulation_options(job);
  opts.stationary_start = true;
  const double x0 = job.x0.value_or(0.0);
  const auto ts = phi ? mc::simulate_nonlocal(family, *phi, x0, grid, job.numeric.paths, job.seed, opts)
                      : mc::simulate_pearson(family, x0, grid, job.numeric.paths, job.seed, opts);
  const double lambda1 = family.eigenvalue(1);
  std::optional<RelaxationEvaluator> relax;
  std::optional<RenewalFunction> renewal;
  if (phi) {
    relax.emplace(*phi);
    renewal.emplace(*phi, std::max(10.0, 1.5 * grid.back()));
  }
  Csv csv{"t", "s", "estimate", "std_error", "theory"};
  for (double t : job.t)
    for (double sv : s) {
      if (sv > t) continue;
      const auto e = mc::estimate_correlation(ts, t, sv);
      const double theory =
          phi ? stationary_correlation(*relax, *renewal, lambda1, t, sv) : std::exp(-lambda1 * (t - sv));
      csv.row({t, sv, e.value, e.std_error, theory});
    }
  return std::move(csv).str();
}

std::string run_classify(const Job& job) { return to_string(require_phi(job).classify_dependence()) + "\n"; }

}  // namespace

// ---------------------------------------------------------------------------

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> parse_grid(const json& grid) {
  if (grid.is_number()) return {grid.get<double>()};
  if (grid.is_array()) {
    std::vector<double> g;
    for (const auto& v : grid) {
      if (!v.is_number()) throw ConfigError("grid: array entries must be numbers");
      g.push_back(v.get<double>());
    }
    return g;
  }
  if (grid.is_string()) {
    const std::string s = grid.get<std::string>();
    std::vector<std::string> parts;
    std::stringstream ss(s);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw ConfigError("grid: expected a:b:n, got '" + s + "'");
    double a, b;
    long n;
    try {
      std::size_t ia, ib, in;
      a = std::stod(parts[0], &ia);
      b = std::stod(parts[1], &ib);
      n = std::stol(parts[2], &in);
      if (ia != parts[0].size() || ib != parts[1].size() || in != parts[2].size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw ConfigError("grid: cannot parse '" + s + "'");
    }
    if (n < 1) throw ConfigError("grid: point count must be positive in '" + s + "'");
    if (n == 1) return {a};
    std::vector<double> g(n);
    for (long i = 0; i < n; ++i) g[i] = a + (b - a) * double(i) / double(n - 1);
    g.back() = b;
    return g;
  }
  throw ConfigError("grid: expected a number, an array or a:b:n");
}

json NumericOptions::to_json() const {
  return {{"n_trunc", n_trunc},
          {"n_trunc_max", n_trunc_max},
          {"truncation_tol", truncation_tol},
          {"continuous_tol", continuous_tol},
          {"tail_tol", tail_tol},
          {"dt", dt},
          {"dt_operational", dt_operational},
          {"scheme", scheme},
          {"paths", paths},
          {"bins", bins},
          {"x_range", x_range},
          {"stationary_start", stationary_start}};
}

NumericOptions NumericOptions::from_json(const json& j) {
  reject_unknown(j, "numeric",
                 {"n_trunc", "n_trunc_max", "truncation_tol", "continuous_tol", "tail_tol", "dt", "dt_operational",
                  "scheme", "paths", "bins", "x_range", "stationary_start"});
  NumericOptions n;
  read(j, "n_trunc", n.n_trunc);
  read(j, "n_trunc_max", n.n_trunc_max);
  read(j, "truncation_tol", n.truncation_tol);
  read(j, "continuous_tol", n.continuous_tol);
  read(j, "tail_tol", n.tail_tol);
  read(j, "dt", n.dt);
  read(j, "dt_operational", n.dt_operational);
  read(j, "scheme", n.scheme);
  read(j, "paths", n.paths);
  read(j, "bins", n.bins);
  read(j, "x_range", n.x_range);
  read(j, "stationary_start", n.stationary_start);
  return n;
}

json Job::to_json() const {
  return {{"command", command},
          {"family", family},
          {"phi", phi},
          {"datum", datum},
          {"mode", mode},
          {"process", process},
          {"grids", {{"t", t}, {"x", x}, {"lambda", lambda}, {"s", s}, {"x0", x0 ? json(*x0) : json(nullptr)}}},
          {"numeric", numeric.to_json()},
          {"seed", seed},
          {"threads", threads},
          {"output", output},
          {"trajectories", trajectories}};
}

Job Job::from_json(const json& j) {
  reject_unknown(j, "config",
                 {"command", "family", "phi", "datum", "mode", "process", "grids", "numeric", "seed", "threads",
                  "output", "trajectories"});
  Job job;
  read(j, "command", job.command);
  if (j.contains("family")) job.family = j.at("family");
  if (j.contains("phi")) job.phi = j.at("phi");
  if (j.contains("datum")) job.datum = j.at("datum");
  read(j, "mode", job.mode);
  read(j, "process", job.process);
  if (j.contains("grids")) {
    const auto& g = j.at("grids");
    reject_unknown(g, "grids", {"t", "x", "lambda", "s", "x0"});
    if (g.contains("t")) job.t = parse_grid(g.at("t"));
    if (g.contains("x")) job.x = parse_grid(g.at("x"));
    if (g.contains("lambda")) job.lambda = parse_grid(g.at("lambda"));
    if (g.contains("s")) job.s = parse_grid(g.at("s"));
    if (g.contains("x0") && !g.at("x0").is_null()) {
      if (!g.at("x0").is_number()) throw ConfigError("grids.x0 must be a number");
      job.x0 = g.at("x0").get<double>();
    }
  }
  if (j.contains("numeric")) job.numeric = NumericOptions::from_json(j.at("numeric"));
  read(j, "seed", job.seed);
  read(j, "threads", job.threads);
  read(j, "output", job.output);
  read(j, "trajectories", job.trajectories);
  // Validate the descriptors eagerly so schema errors surface before any work.
  if (!job.family.is_null()) (void)PearsonFamily::from_json(job.family);
  if (!job.phi.is_null()) (void)Bernstein::from_json(job.phi);
  if (!job.command.empty() && !kCommands.count(job.command))
    throw ConfigError("unknown command '" + job.command + "'");
  return job;
}

std::string execute(const Job& job, std::ostream& log) {
  if (job.command == "phi-eval") return run_phi_eval(job);
  if (job.command == "relax") return run_relax(job);
  if (job.command == "density") return run_density(job, log);
  if (job.command == "solve") return run_solve(job, log);
  if (job.command == "simulate") return run_simulate(job, log);
  if (job.command == "correlation") return run_correlation(job);
  if (job.command == "classify") return run_classify(job);
  throw ConfigError(job.command.empty() ? "no command given" : "unknown command '" + job.command + "'");
}

int exit_code(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DatumError*>(&e) ||
      dynamic_cast<const UnsupportedError*>(&e) || dynamic_cast<const json::exception*>(&e))
    return 2;
  if (dynamic_cast<const NumericFailure*>(&e) || dynamic_cast<const ResolutionError*>(&e)) return 3;
  if (dynamic_cast<const SpectrumBoundError*>(&e) || dynamic_cast<const DomainError*>(&e)) return 4;
  return 1;
}

// ---------------------------------------------------------------------------

namespace {

struct Flags {
  std::string config, family, phi, datum, mode, process, t, x, lambda, s, scheme, x_range, output, trajectories;
  double x0 = 0, truncation_tol = 0, continuous_tol = 0, tail_tol = 0, dt = 0, dt_operational = 0;
  int n_trunc = 0, n_trunc_max = 0, threads = 0;
  std::size_t paths = 0, bins = 0;
  std::uint64_t seed = 0;
  bool stationary = false, dump = false;
};

json parse_json_flag(const std::string& text, const char* name, bool allow_bare_string) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    if (allow_bare_string) return json(text);
    throw ConfigError(std::string("--") + name + ": invalid JSON '" + text + "'");
  }
}

json grid_flag(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return json(text);
  }
}

// Value-taking options. Their arguments may start with '-' (negative grids),
// so each is glued to its option before CLI11 sees it.
const std::set<std::string> kValueOptions{
    "--config", "--family", "--phi", "--datum", "--mode", "--process", "--t", "--x-grid", "--lambda",
    "--s", "--x0", "--n-trunc", "--n-trunc-max", "--truncation-tol", "--continuous-tol", "--tail-tol", "--dt",
    "--dt-operational", "--scheme", "--paths", "--bins", "--x-range", "--seed", "--threads", "--output", "-o",
    "--trajectories"};

std::vector<std::string> glue_values(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (kValueOptions.count(args[i]) && i + 1 < args.size()) {
      const std::string name = args[i] == "-o" ? "--output" : args[i];
      out.push_back(name + "=" + args[i + 1]);
      ++i;
    } else {
      out.push_back(args[i]);
    }
  }
  return out;
}

std::vector<CLI::Option*> add_flags(CLI::App& app, Flags& f) {
  std::vector<CLI::Option*> o;
  o.push_back(app.add_option("--config", f.config, "Job configuration JSON file"));
  o.push_back(app.add_option("--family", f.family, "Pearson family descriptor (JSON)"));
  o.push_back(app.add_option("--phi", f.phi, "Bernstein function descriptor (JSON) or 'none'"));
  o.push_back(app.add_option("--datum", f.datum, "Initial datum descriptor (JSON) or Q<n>"));
  o.push_back(app.add_option("--mode", f.mode, "backward | forward"));
  o.push_back(app.add_option("--process", f.process, "auto | pearson | inverse_subordinator | nonlocal"));
  o.push_back(app.add_option("--t", f.t, "Time grid: value, [..] or a:b:n"));
  o.push_back(app.add_option("--x-grid", f.x, "Space grid: value, [..] or a:b:n"));
  o.push_back(app.add_option("--lambda", f.lambda, "Lambda grid: value, [..] or a:b:n"));
  o.push_back(app.add_option("--s", f.s, "Earlier times for correlation (default 0)"));
  o.push_back(app.add_option("--x0", f.x0, "Starting point"));
  o.push_back(app.add_option("--n-trunc", f.n_trunc, "Series truncation (0: default)"));
  o.push_back(app.add_option("--n-trunc-max", f.n_trunc_max, "Largest truncation for adaptive doubling"));
  o.push_back(app.add_option("--truncation-tol", f.truncation_tol, "Series tail tolerance"));
  o.push_back(app.add_option("--continuous-tol", f.continuous_tol, "Continuous-spectrum quadrature tolerance"));
  o.push_back(app.add_option("--tail-tol", f.tail_tol, "Datum expansion L2 tail tolerance"));
  o.push_back(app.add_option("--dt", f.dt, "SDE time step"));
  o.push_back(app.add_option("--dt-operational", f.dt_operational, "Subordinator operational step"));
  o.push_back(app.add_option("--scheme", f.scheme, "auto | euler | exact"));
  o.push_back(app.add_option("--paths", f.paths, "Number of Monte Carlo paths"));
  o.push_back(app.add_option("--bins", f.bins, "Histogram bins"));
  o.push_back(app.add_option("--x-range", f.x_range, "Histogram range lo:hi"));
  o.push_back(app.add_flag("--stationary", f.stationary, "Start paths from the stationary law"));
  o.push_back(app.add_option("--seed", f.seed, "Master seed"));
  o.push_back(app.add_option("--threads", f.threads, "Worker threads (default NLP_THREADS or 1)"));
  o.push_back(app.add_option("-o,--output", f.output, "Output file ('-' for stdout)"));
  o.push_back(app.add_option("--trajectories", f.trajectories, "Save trajectories to <base>.bin/.json"));
  o.push_back(app.add_flag("--dump-config", f.dump, "Print the resolved job as JSON and exit"));
  return o;
}

// Options may appear before or after the subcommand name, so both the root
// app and the active subcommand are consulted.
struct Given {
  const CLI::App& root;
  const CLI::App& active;
  bool operator()(const std::string& name) const {
    for (const CLI::App* a : {&root, &active}) {
      const auto* opt = a->get_option_no_throw(name);
      if (opt && opt->count() > 0) return true;
    }
    return false;
  }
};

Job build_job(const Given& given, const Flags& f, const std::string& command) {
  Job job;
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) throw ConfigError("cannot read config file " + f.config);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("config file " + f.config + ": " + e.what());
    }
    job = Job::from_json(j);
  }
  if (!command.empty()) job.command = command;
  if (given("--family")) job.family = parse_json_flag(f.family, "family", false);
  if (given("--phi")) job.phi = f.phi == "none" ? json(nullptr) : parse_json_flag(f.phi, "phi", false);
  if (given("--datum")) job.datum = parse_json_flag(f.datum, "datum", true);
  if (given("--mode")) job.mode = f.mode;
  if (given("--process")) job.process = f.process;
  if (given("--t")) job.t = parse_grid(grid_flag(f.t));
  if (given("--x-grid")) job.x = parse_grid(grid_flag(f.x));
  if (given("--lambda")) job.lambda = parse_grid(grid_flag(f.lambda));
  if (given("--s")) job.s = parse_grid(grid_flag(f.s));
  if (given("--x0")) job.x0 = f.x0;
  auto& n = job.numeric;
  if (given("--n-trunc")) n.n_trunc = f.n_trunc;
  if (given("--n-trunc-max")) n.n_trunc_max = f.n_trunc_max;
  if (given("--truncation-tol")) n.truncation_tol = f.truncation_tol;
  if (given("--continuous-tol")) n.continuous_tol = f.continuous_tol;
  if (given("--tail-tol")) n.tail_tol = f.tail_tol;
  if (given("--dt")) n.dt = f.dt;
  if (given("--dt-operational")) n.dt_operational = f.dt_operational;
  if (given("--scheme")) n.scheme = f.scheme;
  if (given("--paths")) n.paths = f.paths;
  if (given("--bins")) n.bins = f.bins;
  if (given("--x-range")) {
    const auto r = parse_grid(grid_flag(f.x_range + ":2"));
    n.x_range = {r.front(), r.back()};
  }
  if (given("--stationary")) n.stationary_start = f.stationary;
  if (given("--seed")) job.seed = f.seed;
  if (given("--threads")) job.threads = f.threads;
  if (given("--output")) job.output = f.output;
  if (given("--trajectories")) job.trajectories = f.trajectories;
  // Re-validate the merged job through the schema.
  return Job::from_json(job.to_json());
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Non-local Pearson diffusions: densities, Cauchy problems, simulation"};
  app.name("nlpd");
  app.require_subcommand(0, 1);
  Flags flags;
  add_flags(app, flags);
  std::vector<CLI::App*> subs;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"phi-eval", "Evaluate the Bernstein function on a lambda grid"},
      {"relax", "Relaxation function E_Phi(t; -lambda) on a t x lambda grid"},
      {"density", "Transition density (classical or non-local) on a t x x grid"},
      {"solve", "Backward or forward Cauchy problem from an initial datum"},
      {"simulate", "Monte Carlo marginal histograms"},
      {"correlation", "Stationary correlation: Monte Carlo estimate and theory"},
      {"classify", "Long- or short-range dependence of the time change"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    add_flags(*sub, flags);
    subs.push_back(sub);
  }

  auto glued = glue_values(args);
  std::vector<std::string> rev(glued.rbegin(), glued.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  const CLI::App* active = &app;
  std::string command;
  for (auto* sub : subs)
    if (sub->parsed()) {
      active = sub;
      command = sub->get_name();
    }

  try {
    const Job job = build_job(Given{app, *active}, flags, command);
    if (flags.dump) {
      out << job.to_json().dump(2) << '\n';
      return 0;
    }
    const std::string text = execute(job, err);
    if (job.output.empty() || job.output == "-") {
      out << text;
    } else {
      std::ofstream file(job.output, std::ios::binary);
      if (!file) throw ConfigError("cannot write " + job.output);
      file << text;
      if (!file) throw ConfigError("error writing " + job.output);
    }
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e);
  }
}

}  // namespace nlpd::cli
