#pragma once

// Run configuration: a line-based `key = value` format with `[section]`
// headers. `#` starts a comment. Lists are comma separated; tuples inside a
// list are separated by `;` and their numbers by whitespace.

#include "plateplast/errors.hpp"
#include "plateplast/evolution.hpp"
#include "plateplast/sl3_dissipation.hpp"

#include <array>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace plateplast {

struct GridConfig {
  double lx = 1.0;
  double ly = 1.0;
  int nx = 8;
  int ny = 8;
  int nz = 4;
  unsigned gamma_d = kLeft | kRight;
  int inplane_order = 3;
  bool operator==(const GridConfig&) const = default;
};

struct MaterialConfig {
  double lam = 1.0;
  double mu = 1.0;
  double k = 1.0;
  double sigma_y = 0.1;
  DissipationDensity::Mode h_mode = DissipationDensity::Mode::Frobenius;
  std::vector<std::array<double, 5>> gauge_directions;  // empty: coordinate axes
  bool operator==(const MaterialConfig&) const = default;
};

enum class ProfileKind { Linear, RampHold, Piecewise };

struct LoadingConfig {
  enum class Family { Zero, Stretch, Bend, Poly };
  Family family = Family::Bend;
  double amplitude = 0.2;
  // Terms (coef, i, j) of coef * x1^i * x2^j, used by the poly family.
  std::vector<std::array<double, 3>> u1, u2, v;
  ProfileKind profile = ProfileKind::Linear;
  double t_ramp = 0.5;
  std::vector<std::pair<double, double>> breakpoints;
  double T = 1.0;
  Reparam reparam = Reparam::None;
  bool operator==(const LoadingConfig&) const = default;
};

struct TimeConfig {
  int steps = 10;
  std::vector<double> knots;  // overrides steps when given
  bool operator==(const TimeConfig&) const = default;
};

struct OutputConfig {
  std::string dir = "out";
  std::string snapshots = "last";  // last | all | none | list of step indices
  bool plotdata = true;
  bool operator==(const OutputConfig&) const = default;
};

struct DiagnosticsConfig {
  std::uint64_t seed = 0;
  int stability_dirs = 0;
  double stability_threshold = 1e-7;
  bool el_check = false;
  double el_threshold = 1e-8;
  bool energy_balance = false;
  double balance_slack = 1e-8;
  Reparam rate_independence = Reparam::None;
  double rate_threshold = 0.0;
  bool lipschitz = false;
  bool operator==(const DiagnosticsConfig&) const = default;
};

struct DissipationConfig {
  int n_segments = 3;
  int max_evals = 100000;
  double penalty = 10.0;
  int restarts = 8;
  std::vector<std::array<double, 9>> matrices;  // row-major
  int random = 0;
  double random_radius = 0.3;
  double c_k = 10.0;
  bool operator==(const DissipationConfig&) const = default;
};

struct CheckConfig {
  std::string nodal;
  std::string points;
  double t = 0.0;
  bool operator==(const CheckConfig&) const = default;
};

struct RunConfig {
  GridConfig grid;
  Alpha alpha = Alpha::Linear;
  MaterialConfig material;
  LoadingConfig loading;
  TimeConfig time;
  SolverTolerances solver;
  OutputConfig output;
  DiagnosticsConfig diagnostics;
  DissipationConfig dissipation;
  CheckConfig check;
  bool operator==(const RunConfig&) const = default;
};

enum class Command { Simulate, Dissipation, Check };

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct BadValue {
  std::string reason;
};

inline double to_double(const std::string& s) {
  const std::string t = trim(s);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v))
    throw BadValue{"expected a finite number, got '" + t + "'"};
  return v;
}

inline long long to_integer(const std::string& s) {
  const std::string t = trim(s);
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(t.c_str(), &end, 10);
  if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE)
    throw BadValue{"expected an integer, got '" + t + "'"};
  return v;
}

inline int to_int(const std::string& s) {
  const long long v = to_integer(s);
  if (v < -2147483647LL || v > 2147483647LL) throw BadValue{"integer out of range"};
  return static_cast<int>(v);
}

inline bool to_bool(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw BadValue{"expected true or false, got '" + s + "'"};
}

inline std::vector<double> to_numbers(const std::string& s) {
  std::vector<double> out;
  std::istringstream in(s);
  std::string w;
  while (in >> w) out.push_back(to_double(w));
  return out;
}

template <std::size_t N>
std::vector<std::array<double, N>> to_tuples(const std::string& s) {
  std::vector<std::array<double, N>> out;
  for (const auto& item : split(s, ';')) {
    const auto nums = to_numbers(item);
    if (nums.size() != N)
      throw BadValue{"expected " + std::to_string(N) + " numbers per entry, got '" + item + "'"};
    std::array<double, N> a;
    std::copy(nums.begin(), nums.end(), a.begin());
    out.push_back(a);
  }
  return out;
}

inline std::vector<std::array<double, 3>> to_poly(const std::string& s) {
  auto terms = to_tuples<3>(s);
  for (const auto& t : terms)
    if (t[1] < 0 || t[2] < 0 || t[1] != std::floor(t[1]) || t[2] != std::floor(t[2]))
      throw BadValue{"polynomial powers must be non-negative integers"};
  return terms;
}

inline unsigned to_edges(const std::string& s) {
  unsigned m = 0;
  for (const auto& e : split(s, ',')) {
    if (e == "left") m |= kLeft;
    else if (e == "right") m |= kRight;
    else if (e == "bottom") m |= kBottom;
    else if (e == "top") m |= kTop;
    else throw BadValue{"unknown edge '" + e + "'"};
  }
  return m;
}

inline Reparam to_reparam(const std::string& s) {
  if (s == "none") return Reparam::None;
  if (s == "square") return Reparam::Square;
  if (s == "smoothstep") return Reparam::SmoothStep;
  throw BadValue{"expected none, square or smoothstep"};
}

inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string reparam_name(Reparam r) {
  switch (r) {
    case Reparam::Square: return "square";
    case Reparam::SmoothStep: return "smoothstep";
    default: return "none";
  }
}

inline std::string edges_name(unsigned m) {
  std::vector<std::string> parts;
  if (m & kLeft) parts.push_back("left");
  if (m & kRight) parts.push_back("right");
  if (m & kBottom) parts.push_back("bottom");
  if (m & kTop) parts.push_back("top");
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? ", " : "") + parts[i];
  return out;
}

template <std::size_t N>
std::string tuples_text(const std::vector<std::array<double, N>>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += "; ";
    for (std::size_t j = 0; j < N; ++j) out += (j ? " " : "") + fmt(v[i][j]);
  }
  return out;
}

/// Parses the snapshot selector into step indices for a run of `steps` steps.
inline std::vector<int> snapshot_selection(const std::string& spec, int steps) {
  std::vector<int> out;
  if (spec == "none") return out;
  if (spec == "last") return {steps};
  if (spec == "all") {
    for (int i = 0; i <= steps; ++i) out.push_back(i);
    return out;
  }
  std::set<int> sorted;
  for (const auto& item : split(spec, ',')) {
    const int i = to_int(item);
    if (i < 0) throw BadValue{"snapshot steps must be >= 0"};
    sorted.insert(i);
  }
  return {sorted.begin(), sorted.end()};
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

inline const std::map<std::string, Setter>& setters() {
  using M = DissipationDensity::Mode;
  using F = LoadingConfig::Family;
  static const std::map<std::string, Setter> table = {
      {"grid.lx", [](RunConfig& c, const std::string& v) { c.grid.lx = to_double(v); }},
      {"grid.ly", [](RunConfig& c, const std::string& v) { c.grid.ly = to_double(v); }},
      {"grid.nx", [](RunConfig& c, const std::string& v) { c.grid.nx = to_int(v); }},
      {"grid.ny", [](RunConfig& c, const std::string& v) { c.grid.ny = to_int(v); }},
      {"grid.nz", [](RunConfig& c, const std::string& v) { c.grid.nz = to_int(v); }},
      {"grid.gamma_d", [](RunConfig& c, const std::string& v) { c.grid.gamma_d = to_edges(v); }},
      {"grid.inplane_order",
       [](RunConfig& c, const std::string& v) { c.grid.inplane_order = to_int(v); }},
      {"model.alpha",
       [](RunConfig& c, const std::string& v) {
         if (v == "linear") c.alpha = Alpha::Linear;
         else if (v == "vonkarman") c.alpha = Alpha::VonKarman;
         else throw BadValue{"expected linear or vonkarman"};
       }},
      {"material.lam", [](RunConfig& c, const std::string& v) { c.material.lam = to_double(v); }},
      {"material.mu", [](RunConfig& c, const std::string& v) { c.material.mu = to_double(v); }},
      {"material.k", [](RunConfig& c, const std::string& v) { c.material.k = to_double(v); }},
      {"material.sigma_y",
       [](RunConfig& c, const std::string& v) { c.material.sigma_y = to_double(v); }},
      {"material.h_mode",
       [](RunConfig& c, const std::string& v) {
         if (v == "frobenius") c.material.h_mode = M::Frobenius;
         else if (v == "gauge") c.material.h_mode = M::Gauge;
         else throw BadValue{"expected frobenius or gauge"};
       }},
      {"material.gauge_directions",
       [](RunConfig& c, const std::string& v) { c.material.gauge_directions = to_tuples<5>(v); }},
      {"loading.family",
       [](RunConfig& c, const std::string& v) {
         if (v == "zero") c.loading.family = F::Zero;
         else if (v == "stretch") c.loading.family = F::Stretch;
         else if (v == "bend") c.loading.family = F::Bend;
         else if (v == "poly") c.loading.family = F::Poly;
         else throw BadValue{"expected zero, stretch, bend or poly"};
       }},
      {"loading.amplitude",
       [](RunConfig& c, const std::string& v) { c.loading.amplitude = to_double(v); }},
      {"loading.u1", [](RunConfig& c, const std::string& v) { c.loading.u1 = to_poly(v); }},
      {"loading.u2", [](RunConfig& c, const std::string& v) { c.loading.u2 = to_poly(v); }},
      {"loading.v", [](RunConfig& c, const std::string& v) { c.loading.v = to_poly(v); }},
      {"loading.profile",
       [](RunConfig& c, const std::string& v) {
         if (v == "linear") c.loading.profile = ProfileKind::Linear;
         else if (v == "ramp_hold") c.loading.profile = ProfileKind::RampHold;
         else if (v == "piecewise") c.loading.profile = ProfileKind::Piecewise;
         else throw BadValue{"expected linear, ramp_hold or piecewise"};
       }},
      {"loading.t_ramp", [](RunConfig& c, const std::string& v) { c.loading.t_ramp = to_double(v); }},
      {"loading.breakpoints",
       [](RunConfig& c, const std::string& v) {
         c.loading.breakpoints.clear();
         for (const auto& a : to_tuples<2>(v)) c.loading.breakpoints.emplace_back(a[0], a[1]);
       }},
      {"loading.T", [](RunConfig& c, const std::string& v) { c.loading.T = to_double(v); }},
      {"loading.reparam",
       [](RunConfig& c, const std::string& v) { c.loading.reparam = to_reparam(v); }},
      {"time.steps", [](RunConfig& c, const std::string& v) { c.time.steps = to_int(v); }},
      {"time.knots",
       [](RunConfig& c, const std::string& v) {
         c.time.knots.clear();
         for (const auto& k : split(v, ',')) c.time.knots.push_back(to_double(k));
       }},
      {"solver.delta", [](RunConfig& c, const std::string& v) { c.solver.delta = to_double(v); }},
      {"solver.alt_tol", [](RunConfig& c, const std::string& v) { c.solver.alt_tol = to_double(v); }},
      {"solver.alt_max", [](RunConfig& c, const std::string& v) { c.solver.alt_max = to_int(v); }},
      {"solver.newton_tol",
       [](RunConfig& c, const std::string& v) { c.solver.newton_tol = to_double(v); }},
      {"solver.newton_max",
       [](RunConfig& c, const std::string& v) { c.solver.newton_max = to_int(v); }},
      {"solver.local_tol",
       [](RunConfig& c, const std::string& v) { c.solver.local_tol = to_double(v); }},
      {"solver.local_max_iter",
       [](RunConfig& c, const std::string& v) { c.solver.local_max_iter = to_int(v); }},
      {"output.dir", [](RunConfig& c, const std::string& v) { c.output.dir = v; }},
      {"output.snapshots",
       [](RunConfig& c, const std::string& v) {
         snapshot_selection(v, 0);
         c.output.snapshots = v;
       }},
      {"output.plotdata", [](RunConfig& c, const std::string& v) { c.output.plotdata = to_bool(v); }},
      {"diagnostics.seed",
       [](RunConfig& c, const std::string& v) {
         const long long s = to_integer(v);
         if (s < 0) throw BadValue{"seed must be >= 0"};
         c.diagnostics.seed = static_cast<std::uint64_t>(s);
       }},
      {"diagnostics.stability_dirs",
       [](RunConfig& c, const std::string& v) { c.diagnostics.stability_dirs = to_int(v); }},
      {"diagnostics.stability_threshold",
       [](RunConfig& c, const std::string& v) { c.diagnostics.stability_threshold = to_double(v); }},
      {"diagnostics.el_check",
       [](RunConfig& c, const std::string& v) { c.diagnostics.el_check = to_bool(v); }},
      {"diagnostics.el_threshold",
       [](RunConfig& c, const std::string& v) { c.diagnostics.el_threshold = to_double(v); }},
      {"diagnostics.energy_balance",
       [](RunConfig& c, const std::string& v) { c.diagnostics.energy_balance = to_bool(v); }},
      {"diagnostics.balance_slack",
       [](RunConfig& c, const std::string& v) { c.diagnostics.balance_slack = to_double(v); }},
      {"diagnostics.rate_independence",
       [](RunConfig& c, const std::string& v) { c.diagnostics.rate_independence = to_reparam(v); }},
      {"diagnostics.rate_threshold",
       [](RunConfig& c, const std::string& v) { c.diagnostics.rate_threshold = to_double(v); }},
      {"diagnostics.lipschitz",
       [](RunConfig& c, const std::string& v) { c.diagnostics.lipschitz = to_bool(v); }},
      {"dissipation.n_segments",
       [](RunConfig& c, const std::string& v) { c.dissipation.n_segments = to_int(v); }},
      {"dissipation.max_evals",
       [](RunConfig& c, const std::string& v) { c.dissipation.max_evals = to_int(v); }},
      {"dissipation.penalty",
       [](RunConfig& c, const std::string& v) { c.dissipation.penalty = to_double(v); }},
      {"dissipation.restarts",
       [](RunConfig& c, const std::string& v) { c.dissipation.restarts = to_int(v); }},
      {"dissipation.matrices",
       [](RunConfig& c, const std::string& v) { c.dissipation.matrices = to_tuples<9>(v); }},
      {"dissipation.random",
       [](RunConfig& c, const std::string& v) { c.dissipation.random = to_int(v); }},
      {"dissipation.random_radius",
       [](RunConfig& c, const std::string& v) { c.dissipation.random_radius = to_double(v); }},
      {"dissipation.c_k", [](RunConfig& c, const std::string& v) { c.dissipation.c_k = to_double(v); }},
      {"check.nodal", [](RunConfig& c, const std::string& v) { c.check.nodal = v; }},
      {"check.points", [](RunConfig& c, const std::string& v) { c.check.points = v; }},
      {"check.t", [](RunConfig& c, const std::string& v) { c.check.t = to_double(v); }},
  };
  return table;
}

inline void require(bool ok, const std::string& key, const std::string& reason) {
  if (!ok) throw ValidationError(key, reason);
}

}  // namespace detail

/// Range checks shared by every command.
inline void validate(const RunConfig& c) {
  using detail::require;
  require(c.grid.lx > 0.0, "grid.lx", "lx must be > 0");
  require(c.grid.ly > 0.0, "grid.ly", "ly must be > 0");
  require(c.grid.nx >= 4 && c.grid.nx <= 64, "grid.nx", "nx must be in [4, 64]");
  require(c.grid.ny >= 4 && c.grid.ny <= 64, "grid.ny", "ny must be in [4, 64]");
  require(c.grid.nz >= 2 && c.grid.nz <= 8, "grid.nz", "nz must be in [2, 8]");
  require(c.grid.gamma_d != 0u, "grid.gamma_d", "gamma_d must name at least one edge");
  require(c.grid.inplane_order >= 2 && c.grid.inplane_order <= 5, "grid.inplane_order",
          "inplane_order must be in [2, 5]");
  require(c.material.lam > 0.0, "material.lam", "lam must be > 0");
  require(c.material.mu > 0.0, "material.mu", "mu must be > 0");
  require(c.material.k > 0.0, "material.k", "k must be > 0");
  require(c.material.sigma_y > 0.0, "material.sigma_y", "sigma_y must be > 0");
  if (!c.material.gauge_directions.empty())
    require(c.material.gauge_directions.size() >= 5, "material.gauge_directions",
            "gauge mode needs at least 5 directions");
  require(c.loading.T > 0.0, "loading.T", "T must be > 0");
  if (c.loading.profile == ProfileKind::RampHold)
    require(c.loading.t_ramp > 0.0 && c.loading.t_ramp <= c.loading.T, "loading.t_ramp",
            "t_ramp must lie in (0, T]");
  if (c.loading.profile == ProfileKind::Piecewise) {
    const auto& bp = c.loading.breakpoints;
    require(bp.size() >= 2, "loading.breakpoints", "piecewise profile needs at least 2 breakpoints");
    require(bp.front().first == 0.0, "loading.breakpoints", "first breakpoint must be at t = 0");
    require(bp.back().first == c.loading.T, "loading.breakpoints",
            "last breakpoint must be at t = T");
    for (std::size_t i = 1; i < bp.size(); ++i)
      require(bp[i].first > bp[i - 1].first, "loading.breakpoints",
              "breakpoint times must increase strictly");
  }
  const int steps = c.time.knots.empty() ? c.time.steps
                                         : static_cast<int>(c.time.knots.size()) - 1;
  if (c.time.knots.empty()) {
    require(c.time.steps >= 1 && c.time.steps <= 200, "time.steps", "steps must be in [1, 200]");
  } else {
    const auto& k = c.time.knots;
    require(k.size() >= 2 && k.size() <= 201, "time.knots", "knots must hold 2 to 201 values");
    require(k.front() == 0.0, "time.knots", "first knot must be 0");
    require(k.back() == c.loading.T, "time.knots", "last knot must equal loading.T");
    for (std::size_t i = 1; i < k.size(); ++i)
      require(k[i] > k[i - 1], "time.knots", "knots must increase strictly");
  }
  require(c.solver.delta >= 0.0, "solver.delta", "delta must be >= 0");
  require(c.solver.alt_tol > 0.0, "solver.alt_tol", "alt_tol must be > 0");
  require(c.solver.alt_max >= 1, "solver.alt_max", "alt_max must be >= 1");
  require(c.solver.newton_tol > 0.0, "solver.newton_tol", "newton_tol must be > 0");
  require(c.solver.newton_max >= 1, "solver.newton_max", "newton_max must be >= 1");
  require(c.solver.local_tol > 0.0, "solver.local_tol", "local_tol must be > 0");
  require(c.solver.local_max_iter >= 1, "solver.local_max_iter", "local_max_iter must be >= 1");
  require(!c.output.dir.empty(), "output.dir", "dir must not be empty");
  for (int s : detail::snapshot_selection(c.output.snapshots, steps))
    require(s <= steps, "output.snapshots", "snapshot step " + std::to_string(s) + " exceeds steps");
  require(c.diagnostics.stability_dirs >= 0, "diagnostics.stability_dirs",
          "stability_dirs must be >= 0");
  require(c.diagnostics.stability_threshold >= 0.0, "diagnostics.stability_threshold",
          "stability_threshold must be >= 0");
  require(c.diagnostics.el_threshold > 0.0, "diagnostics.el_threshold", "el_threshold must be > 0");
  require(c.diagnostics.balance_slack >= 0.0, "diagnostics.balance_slack",
          "balance_slack must be >= 0");
  require(c.diagnostics.rate_threshold >= 0.0, "diagnostics.rate_threshold",
          "rate_threshold must be >= 0");
  require(c.dissipation.n_segments >= 1, "dissipation.n_segments", "n_segments must be >= 1");
  require(c.dissipation.max_evals >= 1, "dissipation.max_evals", "max_evals must be >= 1");
  require(c.dissipation.penalty > 0.0, "dissipation.penalty", "penalty must be > 0");
  require(c.dissipation.restarts >= 0, "dissipation.restarts", "restarts must be >= 0");
  require(c.dissipation.random >= 0, "dissipation.random", "random must be >= 0");
  require(c.dissipation.random_radius > 0.0, "dissipation.random_radius",
          "random_radius must be > 0");
  require(c.dissipation.c_k > 0.0, "dissipation.c_k", "c_k must be > 0");
  for (const auto& m : c.dissipation.matrices)
    require(Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(m.data()).determinant() > 0.0,
            "dissipation.matrices", "matrices must have positive determinant");
}

/// Command-specific checks on top of validate().
inline void validate_for(const RunConfig& c, Command cmd) {
  validate(c);
  using detail::require;
  if (cmd == Command::Simulate || cmd == Command::Check)
    require(c.material.h_mode == DissipationDensity::Mode::Frobenius, "material.h_mode",
            "the plate solver supports h_mode = frobenius only");
  if (cmd == Command::Check) {
    require(!c.check.nodal.empty(), "check.nodal", "nodal snapshot path is required");
    require(!c.check.points.empty(), "check.points", "point snapshot path is required");
    require(std::filesystem::is_regular_file(c.check.nodal), "check.nodal",
            "file not found: " + c.check.nodal);
    require(std::filesystem::is_regular_file(c.check.points), "check.points",
            "file not found: " + c.check.points);
    require(c.check.t >= 0.0 && c.check.t <= c.loading.T, "check.t", "t must lie in [0, T]");
  }
  if (cmd == Command::Dissipation)
    require(!c.dissipation.matrices.empty() || c.dissipation.random > 0, "dissipation.matrices",
            "give matrices or a positive random count");
}

/// Parses and validates. Unknown sections and keys, duplicate keys and
/// malformed values raise ParseError; range violations raise
/// ValidationError.
inline RunConfig parse_config(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  std::set<std::string> seen;
  static const std::set<std::string> sections = {"grid", "model", "material", "loading",
                                                 "time", "solver", "output", "diagnostics",
                                                 "dissipation", "check"};
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(line_no, "", "unterminated section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      if (!sections.count(section))
        throw ParseError(line_no, "", "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "", "expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (section.empty()) throw ParseError(line_no, key, "key outside of any section");
    const std::string path = section + "." + key;
    const auto it = detail::setters().find(path);
    if (it == detail::setters().end()) throw ParseError(line_no, path, "unknown key");
    if (!seen.insert(path).second) throw ParseError(line_no, path, "duplicate key");
    try {
      it->second(c, value);
    } catch (const detail::BadValue& e) {
      throw ParseError(line_no, path, e.reason);
    }
  }
  if (seen.count("time.steps") && seen.count("time.knots"))
    throw ValidationError("time.knots", "give either steps or knots, not both");
  validate(c);
  return c;
}

/// Text that parse_config maps back to an equal configuration.
inline std::string serialize_config(const RunConfig& c) {
  using detail::fmt;
  std::ostringstream o;
  o << "[grid]\n"
    << "lx = " << fmt(c.grid.lx) << "\nly = " << fmt(c.grid.ly) << "\nnx = " << c.grid.nx
    << "\nny = " << c.grid.ny << "\nnz = " << c.grid.nz
    << "\ngamma_d = " << detail::edges_name(c.grid.gamma_d)
    << "\ninplane_order = " << c.grid.inplane_order << "\n\n";
  o << "[model]\nalpha = " << (c.alpha == Alpha::VonKarman ? "vonkarman" : "linear") << "\n\n";
  o << "[material]\nlam = " << fmt(c.material.lam) << "\nmu = " << fmt(c.material.mu)
    << "\nk = " << fmt(c.material.k) << "\nsigma_y = " << fmt(c.material.sigma_y)
    << "\nh_mode = "
    << (c.material.h_mode == DissipationDensity::Mode::Gauge ? "gauge" : "frobenius") << "\n";
  if (!c.material.gauge_directions.empty())
    o << "gauge_directions = " << detail::tuples_text(c.material.gauge_directions) << "\n";
  static const char* families[] = {"zero", "stretch", "bend", "poly"};
  static const char* profiles[] = {"linear", "ramp_hold", "piecewise"};
  o << "\n[loading]\nfamily = " << families[static_cast<int>(c.loading.family)]
    << "\namplitude = " << fmt(c.loading.amplitude) << "\n";
  if (!c.loading.u1.empty()) o << "u1 = " << detail::tuples_text(c.loading.u1) << "\n";
  if (!c.loading.u2.empty()) o << "u2 = " << detail::tuples_text(c.loading.u2) << "\n";
  if (!c.loading.v.empty()) o << "v = " << detail::tuples_text(c.loading.v) << "\n";
  o << "profile = " << profiles[static_cast<int>(c.loading.profile)]
    << "\nt_ramp = " << fmt(c.loading.t_ramp) << "\n";
  if (!c.loading.breakpoints.empty()) {
    o << "breakpoints = ";
    for (std::size_t i = 0; i < c.loading.breakpoints.size(); ++i)
      o << (i ? "; " : "") << fmt(c.loading.breakpoints[i].first) << " "
        << fmt(c.loading.breakpoints[i].second);
    o << "\n";
  }
  o << "T = " << fmt(c.loading.T) << "\nreparam = " << detail::reparam_name(c.loading.reparam)
    << "\n\n[time]\n";
  if (c.time.knots.empty()) {
    o << "steps = " << c.time.steps << "\n";
  } else {
    o << "knots = ";
    for (std::size_t i = 0; i < c.time.knots.size(); ++i)
      o << (i ? ", " : "") << fmt(c.time.knots[i]);
    o << "\n";
  }
  o << "\n[solver]\ndelta = " << fmt(c.solver.delta) << "\nalt_tol = " << fmt(c.solver.alt_tol)
    << "\nalt_max = " << c.solver.alt_max << "\nnewton_tol = " << fmt(c.solver.newton_tol)
    << "\nnewton_max = " << c.solver.newton_max << "\nlocal_tol = " << fmt(c.solver.local_tol)
    << "\nlocal_max_iter = " << c.solver.local_max_iter << "\n\n";
  o << "[output]\ndir = " << c.output.dir << "\nsnapshots = " << c.output.snapshots
    << "\nplotdata = " << (c.output.plotdata ? "true" : "false") << "\n\n";
  const auto& d = c.diagnostics;
  o << "[diagnostics]\nseed = " << d.seed << "\nstability_dirs = " << d.stability_dirs
    << "\nstability_threshold = " << fmt(d.stability_threshold)
    << "\nel_check = " << (d.el_check ? "true" : "false")
    << "\nel_threshold = " << fmt(d.el_threshold)
    << "\nenergy_balance = " << (d.energy_balance ? "true" : "false")
    << "\nbalance_slack = " << fmt(d.balance_slack)
    << "\nrate_independence = " << detail::reparam_name(d.rate_independence)
    << "\nrate_threshold = " << fmt(d.rate_threshold)
    << "\nlipschitz = " << (d.lipschitz ? "true" : "false") << "\n\n";
  const auto& s = c.dissipation;
  o << "[dissipation]\nn_segments = " << s.n_segments << "\nmax_evals = " << s.max_evals
    << "\npenalty = " << fmt(s.penalty) << "\nrestarts = " << s.restarts << "\n";
  if (!s.matrices.empty()) o << "matrices = " << detail::tuples_text(s.matrices) << "\n";
  o << "random = " << s.random << "\nrandom_radius = " << fmt(s.random_radius)
    << "\nc_k = " << fmt(s.c_k) << "\n\n";
  o << "[check]\n";
  if (!c.check.nodal.empty()) o << "nodal = " << c.check.nodal << "\n";
  if (!c.check.points.empty()) o << "points = " << c.check.points << "\n";
  o << "t = " << fmt(c.check.t) << "\n";
  return o.str();
}

// ---------------------------------------------------------------------------
// Builders

inline Grid make_grid(const RunConfig& c) {
  return Grid(c.grid.lx, c.grid.ly, c.grid.nx, c.grid.ny, c.grid.nz, c.grid.gamma_d,
              c.grid.inplane_order);
}

inline DissipationDensity make_dissipation(const RunConfig& c) {
  if (c.material.h_mode == DissipationDensity::Mode::Frobenius)
    return DissipationDensity::frobenius(c.material.sigma_y);
  std::vector<Vec5> dirs;
  if (c.material.gauge_directions.empty())
    for (int i = 0; i < 5; ++i) dirs.push_back(Vec5::Unit(i));
  for (const auto& a : c.material.gauge_directions) dirs.push_back(Eigen::Map<const Vec5>(a.data()));
  return DissipationDensity::gauge(c.material.sigma_y, dirs);
}

inline Models make_models(const RunConfig& c) {
  return Models{IsotropicElasticity(c.material.lam, c.material.mu),
                HardeningForm::isotropic(c.material.k), make_dissipation(c), c.alpha};
}

inline BoundaryTrajectory make_trajectory(const RunConfig& c) {
  const auto& l = c.loading;
  TimeProfile profile = TimeProfile::linear(l.T);
  if (l.profile == ProfileKind::RampHold) profile = TimeProfile::ramp_hold(l.T, l.t_ramp);
  if (l.profile == ProfileKind::Piecewise) profile = TimeProfile::piecewise_linear(l.breakpoints);
  auto poly = [](const std::vector<std::array<double, 3>>& terms) {
    std::vector<Poly2D::Term> t;
    for (const auto& a : terms) t.push_back({a[0], static_cast<int>(a[1]), static_cast<int>(a[2])});
    return Poly2D(t);
  };
  BoundaryTrajectory traj = BoundaryTrajectory::zero(l.T);
  switch (l.family) {
    case LoadingConfig::Family::Zero:
      traj = BoundaryTrajectory(LoadingFamily::MixedPoly, Poly2D(), Poly2D(), Poly2D(), profile);
      break;
    case LoadingConfig::Family::Stretch:
      traj = BoundaryTrajectory::stretch(l.amplitude, profile);
      break;
    case LoadingConfig::Family::Bend:
      traj = BoundaryTrajectory::bend(l.amplitude, profile);
      break;
    case LoadingConfig::Family::Poly:
      traj = BoundaryTrajectory(LoadingFamily::MixedPoly, poly(l.u1), poly(l.u2), poly(l.v), profile);
      break;
  }
  return traj.with_reparam(l.reparam);
}

inline TimePartition make_partition(const RunConfig& c) {
  if (!c.time.knots.empty()) return TimePartition(c.time.knots);
  return TimePartition::uniform(c.loading.T, c.time.steps);
}

inline PathPlan make_plan(const RunConfig& c) {
  PathPlan p;
  p.n_segments = c.dissipation.n_segments;
  p.max_evals = c.dissipation.max_evals;
  p.penalty = c.dissipation.penalty;
  p.restarts = c.dissipation.restarts;
  p.seed = c.diagnostics.seed;
  return p;
}

}  // namespace plateplast
