#pragma once

// Command orchestration: simulate, dissipation and check. Each command
// writes its artifacts and a manifest into the output directory and
// returns a process exit status.

#include "plateplast/config.hpp"
#include "plateplast/io.hpp"
#include "plateplast/sl3_dissipation.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#ifndef PLATEPLAST_VERSION
#define PLATEPLAST_VERSION "0.0.0"
#endif

namespace plateplast {

enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitUsage = 2,
  kExitSolverFailed = 3,
  kExitIo = 4,
};

struct RunStreams {
  std::ostream& out;  // summary tables, silenced by quiet
  std::ostream& err;  // failures, always written
  bool quiet = false;
};

inline constexpr double kNoThreshold = std::numeric_limits<double>::quiet_NaN();

struct DiagnosticRow {
  std::string check;
  double value = 0.0;
  double threshold = 0.0;
  bool gated = true;  // false for report-only rows
  bool passed = true;
};

using DiagnosticReport = std::vector<DiagnosticRow>;

inline bool all_passed(const DiagnosticReport& rep) {
  for (const auto& r : rep)
    if (r.gated && !r.passed) return false;
  return true;
}

inline void write_diagnostics_csv(std::ostream& o, const DiagnosticReport& rep) {
  o << "check,value,threshold,status\n";
  for (const auto& r : rep)
    o << r.check << "," << format_number(r.value) << "," << format_number(r.threshold) << ","
      << (r.gated ? (r.passed ? "pass" : "fail") : "report") << "\n";
}

inline void write_diagnostics_table(std::ostream& o, const DiagnosticReport& rep) {
  char line[160];
  std::snprintf(line, sizeof line, "%-28s %-24s %-24s %s\n", "check", "value", "threshold",
                "status");
  o << line;
  for (const auto& r : rep) {
    std::snprintf(line, sizeof line, "%-28s %-24.17g %-24.17g %s\n", r.check.c_str(), r.value,
                  r.threshold, r.gated ? (r.passed ? "pass" : "FAIL") : "report");
    o << line;
  }
}

namespace detail {

class PhaseClock {
 public:
  void start(const std::string& name) {
    stop();
    name_ = name;
    t0_ = std::chrono::steady_clock::now();
  }
  void stop() {
    if (name_.empty()) return;
    const std::chrono::duration<double> d = std::chrono::steady_clock::now() - t0_;
    phases_[name_] = phases_.value(name_, 0.0) + d.count();
    name_.clear();
  }
  const nlohmann::json& phases() const { return phases_; }

 private:
  std::string name_;
  std::chrono::steady_clock::time_point t0_;
  nlohmann::json phases_ = nlohmann::json::object();
};

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot write " + p.string());
  f << s;
  if (!f) throw Error("write failed for " + p.string());
}

template <class Fn>
void write_file(const std::filesystem::path& p, Fn&& fn) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot write " + p.string());
  fn(f);
  if (!f) throw Error("write failed for " + p.string());
}

inline void write_manifest(const std::filesystem::path& dir, const std::string& command,
                           const RunConfig& cfg, const PhaseClock& clock,
                           const std::vector<std::string>& files, int status) {
  nlohmann::json m;
  m["tool"] = "plateplast";
  m["version"] = PLATEPLAST_VERSION;
  m["command"] = command;
  m["exit_status"] = status;
  m["config"] = serialize_config(cfg);
  m["phase_seconds"] = clock.phases();
  nlohmann::json inv = nlohmann::json::array();
  for (const auto& f : files) {
    const auto p = dir / f;
    inv.push_back({{"path", f},
                   {"bytes", std::filesystem::file_size(p)},
                   {"sha256", sha256_file(p)}});
  }
  m["files"] = inv;
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

inline std::string snapshot_stem(int step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "snapshots/step_%04d", step);
  return buf;
}

inline TimePartition halved(const TimePartition& part) {
  std::vector<double> k;
  const auto& c = part.knots();
  for (std::size_t i = 0; i + 1 < c.size(); ++i) {
    k.push_back(c[i]);
    k.push_back(0.5 * (c[i] + c[i + 1]));
  }
  k.push_back(c.back());
  return TimePartition(std::move(k));
}

}  // namespace detail

/// Runs the evolution and the enabled diagnostics. Exit status is 0 iff no
/// step failed and every enabled check passed its threshold.
inline int run_simulate(const RunConfig& cfg, const RunStreams& io) {
  namespace fs = std::filesystem;
  detail::PhaseClock clock;
  const fs::path dir(cfg.output.dir);
  std::vector<std::string> files;
  std::string phase = "setup";
  try {
    clock.start("setup");
    fs::create_directories(dir / "snapshots");
    detail::write_text(dir / "config.conf", serialize_config(cfg));
    files.push_back("config.conf");
    const Grid grid = make_grid(cfg);
    if (!grid.single_edge_gamma_d())
      io.err << "warning: gamma_d spans several edges; the clamped part meets the free "
                "boundary in more than two points\n";
    const Models models = make_models(cfg);
    const BoundaryTrajectory traj = make_trajectory(cfg);
    const Evolution evo(grid, models, traj, cfg.solver);
    const TimePartition part = make_partition(cfg);
    const auto snaps = detail::snapshot_selection(cfg.output.snapshots, part.steps());
    const auto& dg = cfg.diagnostics;

    phase = "evolution";
    clock.start("evolution");
    EvolutionOptions opts;
    opts.stability_dirs = dg.stability_dirs;
    opts.el_check = dg.el_check;
    opts.keep_states = dg.lipschitz;
    opts.seed = dg.seed;
    EvolutionTrace rows;
    auto observer = [&](const TraceRow& row, const PlateState& s) {
      rows.push_back(row);
      if (!std::binary_search(snaps.begin(), snaps.end(), row.step)) return;
      const std::string stem = detail::snapshot_stem(row.step);
      detail::write_file(dir / (stem + "_points.csv"), [&](std::ostream& o) {
        write_point_snapshot(o, evo.discretization(), s, models.alpha);
      });
      detail::write_file(dir / (stem + "_nodal.csv"),
                         [&](std::ostream& o) { write_nodal_snapshot(o, grid, s); });
      files.push_back(stem + "_points.csv");
      files.push_back(stem + "_nodal.csv");
    };
    EvolutionResult result;
    try {
      result = run_evolution(evo, part, opts, observer);
    } catch (const StepError& e) {
      detail::write_file(dir / "trace.csv", [&](std::ostream& o) { write_trace_csv(o, rows); });
      files.push_back("trace.csv");
      clock.stop();
      io.err << "evolution failed: " << e.what() << "\n";
      detail::write_manifest(dir, "simulate", cfg, clock, files, kExitSolverFailed);
      return kExitSolverFailed;
    }

    phase = "output";
    clock.start("output");
    detail::write_file(dir / "trace.csv",
                       [&](std::ostream& o) { write_trace_csv(o, result.trace); });
    files.push_back("trace.csv");
    if (cfg.output.plotdata) {
      detail::write_file(dir / "plotdata.csv",
                         [&](std::ostream& o) { emit_plotdata(o, result.trace); });
      files.push_back("plotdata.csv");
    }

    phase = "diagnostics";
    clock.start("diagnostics");
    DiagnosticReport rep;
    double rmin = 0.0;
    for (const auto& r : result.trace) rmin = std::min(rmin, r.balance_residual);
    rep.push_back({"balance_residual_max", max_balance_residual(result.trace), kNoThreshold, false, true});
    if (dg.stability_dirs > 0) {
      double m = std::numeric_limits<double>::infinity();
      for (const auto& r : result.trace) m = std::min(m, r.stability_margin);
      rep.push_back({"stability_margin_min", m, -dg.stability_threshold, true,
                     m >= -dg.stability_threshold});
    }
    if (dg.el_check) {
      double m = 0.0;
      for (const auto& r : result.trace) m = std::max(m, r.el_residual);
      rep.push_back({"el_residual_max", m, dg.el_threshold, true, m <= dg.el_threshold});
    }
    if (dg.energy_balance) {
      const TimePartition fine = detail::halved(part);
      const auto fr = run_evolution(evo, fine);
      const BalanceReport b = check_energy_balance(result.trace, part.tau(), fr.trace, fine.tau(),
                                                   cfg.solver, dg.balance_slack);
      rep.push_back({"balance_min", rmin, -dg.balance_slack, true, rmin >= -dg.balance_slack});
      rep.push_back({"balance_refined_max", b.max_fine, b.max_coarse, false, true});
      rep.push_back({"balance_flagged_knots", static_cast<double>(b.flagged), 0.0, true,
                     b.flagged == 0});
    }
    if (dg.rate_independence != Reparam::None) {
      const double d = rate_independence_test(grid, models, traj, cfg.solver, part,
                                              dg.rate_independence);
      rep.push_back({"rate_independence", d, dg.rate_threshold, true, d <= dg.rate_threshold});
    }
    if (dg.lipschitz) {
      const FieldNorms q = lipschitz_report(evo.discretization(), result.trace, result.states);
      rep.push_back({"lipschitz_u", q.u, kNoThreshold, false, true});
      rep.push_back({"lipschitz_v", q.v, kNoThreshold, false, true});
      rep.push_back({"lipschitz_p", q.p, kNoThreshold, false, true});
    }
    detail::write_file(dir / "diagnostics.csv",
                       [&](std::ostream& o) { write_diagnostics_csv(o, rep); });
    detail::write_file(dir / "diagnostics.txt",
                       [&](std::ostream& o) { write_diagnostics_table(o, rep); });
    files.push_back("diagnostics.csv");
    files.push_back("diagnostics.txt");
    clock.stop();

    const int status = all_passed(rep) ? kExitOk : kExitCheckFailed;
    if (!io.quiet) write_diagnostics_table(io.out, rep);
    for (const auto& r : rep)
      if (r.gated && !r.passed)
        io.err << "check failed: " << r.check << " = " << format_number(r.value)
               << " (threshold " << format_number(r.threshold) << ")\n";
    detail::write_manifest(dir, "simulate", cfg, clock, files, status);
    return status;
  } catch (const Error& e) {
    io.err << phase << " failed: " << e.what() << "\n";
    return phase == "setup" || phase == "output" ? kExitIo : kExitSolverFailed;
  } catch (const std::filesystem::filesystem_error& e) {
    io.err << phase << " failed: " << e.what() << "\n";
    return kExitIo;
  }
}

/// Random unit-determinant matrices exp(A), A trace-free with Frobenius
/// norm up to `radius`.
inline std::vector<Mat3> random_sl3(int count, double radius, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Mat3> out;
  for (int i = 0; i < count; ++i) {
    Mat3 a;
    for (int k = 0; k < 9; ++k) a(k / 3, k % 3) = n(rng);
    a -= a.trace() / 3.0 * Mat3::Identity();
    a *= radius * u(rng) / a.norm();
    out.push_back(mat_exp(a));
  }
  return out;
}

/// Bound table for every configured matrix and segment count.
inline int run_dissipation(const RunConfig& cfg, const RunStreams& io) {
  namespace fs = std::filesystem;
  detail::PhaseClock clock;
  const fs::path dir(cfg.output.dir);
  std::vector<std::string> files;
  try {
    clock.start("setup");
    fs::create_directories(dir);
    detail::write_text(dir / "config.conf", serialize_config(cfg));
    files.push_back("config.conf");
    const DissipationDensity d = make_dissipation(cfg);
    const PathPlan plan = make_plan(cfg);
    std::vector<Mat3> mats;
    for (const auto& a : cfg.dissipation.matrices)
      mats.push_back(Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(a.data()));
    const auto rnd = random_sl3(cfg.dissipation.random, cfg.dissipation.random_radius,
                                cfg.diagnostics.seed);
    mats.insert(mats.end(), rnd.begin(), rnd.end());

    clock.start("optimize");
    std::ostringstream table;
    table << "id,segments,upper_bound,feasible,endpoint_error,budget_exceeded,one_segment,"
             "in_compact_set,renormalized\n";
    bool ok = true;
    for (std::size_t i = 0; i < mats.size(); ++i) {
      const SL3Matrix f(mats[i]);
      const double one = d_upper_one_segment(d, f);
      const bool in_k = in_compact_set(f, cfg.dissipation.c_k);
      const auto chain = d_upper_chain(d, f, plan);
      for (std::size_t n = 0; n < chain.size(); ++n) {
        const auto& b = chain[n];
        table << i << "," << n + 1 << "," << format_number(b.value) << ","
              << (b.feasible ? 1 : 0) << "," << format_number(b.endpoint_error) << ","
              << (b.budget_exceeded ? 1 : 0) << "," << format_number(one) << ","
              << (in_k ? 1 : 0) << "," << (f.warning().empty() ? 0 : 1) << "\n";
      }
      if (!chain.back().feasible) {
        ok = false;
        io.err << "dissipation: no feasible path for matrix " << i << "\n";
      }
      if (!f.warning().empty()) io.err << "warning: matrix " << i << ": " << f.warning() << "\n";
    }
    clock.start("output");
    detail::write_text(dir / "dissipation.csv", table.str());
    files.push_back("dissipation.csv");
    clock.stop();
    if (!io.quiet) io.out << table.str();
    const int status = ok ? kExitOk : kExitCheckFailed;
    detail::write_manifest(dir, "dissipation", cfg, clock, files, status);
    return status;
  } catch (const Error& e) {
    io.err << "dissipation failed: " << e.what() << "\n";
    return kExitSolverFailed;
  } catch (const std::filesystem::filesystem_error& e) {
    io.err << "dissipation failed: " << e.what() << "\n";
    return kExitIo;
  }
}

/// Diagnostics on a stored snapshot: Euler-Lagrange residual and
/// stability margin at time check.t.
inline int run_check(const RunConfig& cfg, const RunStreams& io) {
  namespace fs = std::filesystem;
  detail::PhaseClock clock;
  const fs::path dir(cfg.output.dir);
  std::vector<std::string> files;
  std::string phase = "load";
  try {
    clock.start("load");
    fs::create_directories(dir);
    detail::write_text(dir / "config.conf", serialize_config(cfg));
    files.push_back("config.conf");
    const Grid grid = make_grid(cfg);
    const Evolution evo(grid, make_models(cfg), make_trajectory(cfg), cfg.solver);
    std::ifstream nodal(cfg.check.nodal);
    std::ifstream points(cfg.check.points);
    if (!nodal || !points) throw Error("cannot open snapshot files");
    const PlateState s = read_snapshot(nodal, points, grid);
    const PlateState at_t = apply_boundary(grid, s, evo.trajectory(), cfg.check.t);
    const double bc_gap = field_distance(evo.discretization(), s, at_t).max();

    phase = "diagnostics";
    clock.start("diagnostics");
    const auto& dg = cfg.diagnostics;
    DiagnosticReport rep;
    rep.push_back({"boundary_mismatch", bc_gap, 1e-12, true, bc_gap <= 1e-12});
    const double el = check_euler_lagrange(evo, s);
    rep.push_back({"el_residual", el, dg.el_threshold, true, el <= dg.el_threshold});
    StabilityOptions so;
    so.n_dirs = dg.stability_dirs > 0 ? dg.stability_dirs : 50;
    so.seed = dg.seed;
    const double m = check_stability(evo, s, so);
    rep.push_back({"stability_margin", m, -dg.stability_threshold, true,
                   m >= -dg.stability_threshold});
    const EnergyParts en = evo.energy(s);
    rep.push_back({"elastic_energy", en.elastic, kNoThreshold, false, true});
    rep.push_back({"hardening_energy", en.hardening, kNoThreshold, false, true});
    detail::write_file(dir / "check.csv", [&](std::ostream& o) { write_diagnostics_csv(o, rep); });
    detail::write_file(dir / "check.txt", [&](std::ostream& o) { write_diagnostics_table(o, rep); });
    files.push_back("check.csv");
    files.push_back("check.txt");
    clock.stop();
    const int status = all_passed(rep) ? kExitOk : kExitCheckFailed;
    if (!io.quiet) write_diagnostics_table(io.out, rep);
    for (const auto& r : rep)
      if (r.gated && !r.passed) io.err << "check failed: " << r.check << "\n";
    detail::write_manifest(dir, "check", cfg, clock, files, status);
    return status;
  } catch (const Error& e) {
    io.err << phase << " failed: " << e.what() << "\n";
    return phase == "load" ? kExitIo : kExitSolverFailed;
  } catch (const std::filesystem::filesystem_error& e) {
    io.err << phase << " failed: " << e.what() << "\n";
    return kExitIo;
  }
}

}  // namespace plateplast
