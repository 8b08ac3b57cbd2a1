#pragma once

// Time-incremental solver for the reduced quasistatic evolution and the
// diagnostics that certify it: stability against sampled competitors,
// discrete energy balance, the Euler-Lagrange residual, rate independence
// and Lipschitz-in-time estimates.

#include "plateplast/elastic.hpp"
#include "plateplast/errors.hpp"
#include "plateplast/forms.hpp"
#include "plateplast/loading.hpp"
#include "plateplast/plate_fields.hpp"
#include "plateplast/pointwise_plasticity.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace plateplast {

class TimePartition {
 public:
  static TimePartition uniform(double T, int steps) {
    if (!(T > 0.0)) throw InvalidArgument("T must be > 0");
    if (steps < 1) throw InvalidArgument("steps must be >= 1");
    std::vector<double> k(static_cast<std::size_t>(steps) + 1);
    for (int i = 0; i <= steps; ++i) k[i] = T * i / steps;
    k.back() = T;
    return TimePartition(std::move(k));
  }

  explicit TimePartition(std::vector<double> knots) : knots_(std::move(knots)) {
    if (knots_.size() < 2) throw InvalidArgument("a partition needs at least two knots");
    if (knots_.front() != 0.0) throw InvalidArgument("first knot must be 0");
    for (std::size_t i = 1; i < knots_.size(); ++i)
      if (!(knots_[i] > knots_[i - 1]))
        throw InvalidArgument("knots must increase strictly");
  }

  const std::vector<double>& knots() const { return knots_; }
  int steps() const { return static_cast<int>(knots_.size()) - 1; }
  double horizon() const { return knots_.back(); }
  double tau() const {
    double m = 0.0;
    for (std::size_t i = 1; i < knots_.size(); ++i) m = std::max(m, knots_[i] - knots_[i - 1]);
    return m;
  }

  /// Image of the knots under a time reparametrization of [0, T].
  TimePartition mapped(Reparam r) const {
    std::vector<double> k(knots_.size());
    for (std::size_t i = 0; i < k.size(); ++i) k[i] = reparam_value(r, knots_[i], horizon());
    k.front() = 0.0;
    return TimePartition(std::move(k));
  }

 private:
  std::vector<double> knots_;
};

struct SolverTolerances {
  double delta = 0.0;
  double alt_tol = 1e-10;
  int alt_max = 200;
  double newton_tol = 1e-10;
  int newton_max = 50;
  double local_tol = 1e-10;
  int local_max_iter = 10000;

  bool operator==(const SolverTolerances&) const = default;

  void validate() const {
    if (!(delta >= 0.0)) throw InvalidArgument("delta must be >= 0");
    if (!(alt_tol > 0.0)) throw InvalidArgument("alt_tol must be > 0");
    if (alt_max < 1) throw InvalidArgument("alt_max must be >= 1");
    if (!(newton_tol > 0.0)) throw InvalidArgument("newton_tol must be > 0");
    if (newton_max < 1) throw InvalidArgument("newton_max must be >= 1");
    if (!(local_tol > 0.0)) throw InvalidArgument("local_tol must be > 0");
    if (local_max_iter < 1) throw InvalidArgument("local_max_iter must be >= 1");
  }
};

struct Models {
  IsotropicElasticity el;
  HardeningForm h;
  DissipationDensity d;
  Alpha alpha;
};

struct TraceRow {
  int step = 0;
  double t = 0.0;
  double elastic = 0.0;
  double hardening = 0.0;
  double dissipation_cum = 0.0;
  double work_cum = 0.0;
  double balance_residual = 0.0;
  double stability_margin = std::numeric_limits<double>::quiet_NaN();
  double el_residual = std::numeric_limits<double>::quiet_NaN();
  int inner_iters = 0;
};

using EvolutionTrace = std::vector<TraceRow>;

struct StepResult {
  PlateState state;
  int inner_iters = 0;
  double objective = 0.0;
  bool converged = false;
};

struct StabilityOptions {
  int n_dirs = 50;
  std::vector<double> amplitudes{1e-3, 1e-2, 1e-1};
  bool zero_plastic = false;
  bool informed = true;
  std::uint64_t seed = 0;
};

/// One problem instance: grid, constitutive models, loading and solver
/// settings. Stateless with respect to the evolution; all methods are const.
class Evolution {
 public:
  Evolution(const Grid& grid, Models models, BoundaryTrajectory traj,
            SolverTolerances tol = {})
      : disc_(grid), models_(std::move(models)), traj_(std::move(traj)), tol_(tol),
        elastic_(disc_, models_.el, models_.alpha,
                 NewtonOptions{tol.newton_tol, tol.newton_max}),
        local_(models_.el, models_.h, models_.d, tol.local_tol, tol.local_max_iter),
        lift_(interpolate_data(grid, traj_)) {
    tol_.validate();
  }

  const Grid& grid() const { return disc_.grid(); }
  const Discretization& discretization() const { return disc_; }
  const Models& models() const { return models_; }
  const BoundaryTrajectory& trajectory() const { return traj_; }
  const SolverTolerances& tolerances() const { return tol_; }
  const ElasticSolver& elastic_solver() const { return elastic_; }
  const LocalProblem& local_problem() const { return local_; }
  const Lifting& lifting() const { return lift_; }

  /// Elastic plus hardening energy at fixed boundary data.
  EnergyParts energy(const PlateState& s) const {
    return {elastic_energy(disc_, s, elastic_.plane_matrix(), models_.alpha),
            hardening_energy(grid(), s.p, models_.h)};
  }

  double objective(const PlateState& s, const std::vector<DeviatoricTensor>& p_ref) const {
    return energy(s).total() + dissipation_increment(grid(), s.p, p_ref, models_.d);
  }

  ElasticResult minimize_elastic(PlateState& s) const { return elastic_.minimize(s); }

  /// Pointwise plastic update against p_ref at the current strain; returns
  /// the largest local iteration count.
  int update_plastic(PlateState& s, const std::vector<DeviatoricTensor>& p_ref) const {
    const std::vector<Sym2> e = assemble_strain(disc_, s, models_.alpha);
    int worst = 0;
    for (std::size_t i = 0; i < e.size(); ++i) {
      const LocalResult r = prox_update(local_, e[i], p_ref[i]);
      s.p[i] = r.p;
      worst = std::max(worst, r.iters);
    }
    return worst;
  }

  /// The state with its boundary data moved from time t_from to t_to by
  /// the lifting.
  PlateState shifted(const PlateState& s, double t_from, double t_to) const {
    const double ds = traj_.s(t_to) - traj_.s(t_from);
    PlateState out = s;
    if (ds != 0.0) {
      out.u += ds * lift_.u;
      out.v += ds * lift_.v;
    }
    return out;
  }

  /// Trapezoidal work over [t0, t1] with both endpoint integrands taken at
  /// the step-end state, moved back to t0 for the left endpoint.
  double work_increment(const PlateState& end, double t0, double t1) const {
    const PlateState back = shifted(end, t1, t0);
    const double w0 =
        work_rate(disc_, back, traj_, lift_, models_.el, models_.alpha, t0, Side::Right);
    const double w1 =
        work_rate(disc_, end, traj_, lift_, models_.el, models_.alpha, t1, Side::Left);
    return 0.5 * (t1 - t0) * (w0 + w1);
  }

 private:
  Discretization disc_;
  Models models_;
  BoundaryTrajectory traj_;
  SolverTolerances tol_;
  ElasticSolver elastic_;
  LocalProblem local_;
  Lifting lift_;
};

/// Approximate minimizer of energy(t) + dissipation from prev by
/// alternating elastic solves and pointwise plastic updates.
inline StepResult incremental_step(const Evolution& evo, const PlateState& prev, double t) {
  const SolverTolerances& tol = evo.tolerances();
  StepResult r;
  r.state = apply_boundary(evo.grid(), prev, evo.trajectory(), t);
  evo.minimize_elastic(r.state);
  double obj = evo.objective(r.state, prev.p);
  for (int it = 0; it < tol.alt_max; ++it) {
    evo.update_plastic(r.state, prev.p);
    evo.minimize_elastic(r.state);
    const double next = evo.objective(r.state, prev.p);
    r.inner_iters = it + 1;
    if (next > obj + 1e-12 * std::abs(obj) + 1e-20)
      throw InternalError("alternation increased the objective from " + std::to_string(obj) +
                          " to " + std::to_string(next));
    const double decrease = obj - next;
    obj = next;
    if (decrease <= tol.alt_tol * std::abs(obj)) {
      r.converged = true;
      break;
    }
  }
  r.objective = obj;
  return r;
}

// ---------------------------------------------------------------------------
// Diagnostics

/// Stress-normalized residual of the discrete Euler-Lagrange equations:
/// max over free DOFs k of |dE/dz_k| / (|C2 e|_{L2(supp k)} |de_k|_{L2}).
/// Both the u equations and the v equations enter.
inline double check_euler_lagrange(const Evolution& evo, const PlateState& s) {
  const ElasticSolver& solver = evo.elastic_solver();
  const Grid& g = evo.grid();
  const Discretization& disc = evo.discretization();
  const Eigen::Matrix3d& d = solver.plane_matrix();
  const double l = l_alpha(evo.models().alpha);
  const Eigen::VectorXd grad = solver.gradient(s);
  Eigen::VectorXd basis_sq = Eigen::VectorXd::Zero(solver.num_dofs());
  Eigen::VectorXd stress_sq = Eigen::VectorXd::Zero(solver.num_dofs());
  double global_sq = 0.0;
  ElasticSolver::StrainJac a, k;
  for_each_inplane_point(g, [&](int ci, int cj, int gp) {
    const PointKinematics kin = point_kinematics(disc, s.u, s.v, ci, cj, gp);
    solver.strain_jacobians(gp, kin.grad_v, a, k);
    const auto dofs = solver.local_dofs(ci, cj);
    for (int layer = 0; layer < g.nz(); ++layer) {
      const double x3 = g.layer_x3(layer);
      const double w = g.gp_weight(gp) * g.layer_weight(layer);
      const DeviatoricTensor& p = s.p[g.point_index(g.cell(ci, cj), gp, layer)];
      const Sym2 e = driving_strain(kin, l, x3) - p.minor2();
      const Eigen::Vector3d sig = d * Eigen::Vector3d(e(0, 0), e(1, 1), 2.0 * e(0, 1));
      const double sig2 = sig(0) * sig(0) + sig(1) * sig(1) + 2.0 * sig(2) * sig(2);
      global_sq += w * sig2;
      for (int j = 0; j < ElasticSolver::kLocalDofs; ++j) {
        const Eigen::Vector3d c = a.col(j) + x3 * k.col(j);
        basis_sq(dofs[j]) += w * (c(0) * c(0) + c(1) * c(1) + 0.5 * c(2) * c(2));
        stress_sq(dofs[j]) += w * sig2;
      }
    }
  });
  if (global_sq == 0.0) return 0.0;
  const double floor = 1e-8 * global_sq;
  double worst = 0.0;
  for (int kk = 0; kk < solver.num_dofs(); ++kk) {
    if (solver.free_index(kk) < 0 || basis_sq(kk) == 0.0) continue;
    const double denom = std::sqrt(std::max(stress_sq(kk), floor) * basis_sq(kk));
    worst = std::max(worst, std::abs(grad(kk)) / denom);
  }
  return worst;
}

/// min over sampled competitors z^ of
///   [J(z^) + int H_D(p^ - p)] - J(z),
/// where J is the elastic plus hardening energy at the boundary data of
/// the state. Random competitors perturb the free (u, v) DOFs and p at the
/// given amplitudes; informed competitors move p toward its pointwise
/// update against itself and re-solve (u, v).
inline double check_stability(const Evolution& evo, const PlateState& s,
                              const StabilityOptions& opts) {
  const Grid& g = evo.grid();
  const ElasticSolver& solver = evo.elastic_solver();
  const DissipationDensity& dd = evo.models().d;
  const double j0 = evo.energy(s).total();
  auto margin = [&](const PlateState& c) {
    return evo.energy(c).total() + dissipation_increment(g, c.p, s.p, dd) - j0;
  };
  double worst = std::numeric_limits<double>::infinity();

  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const int nu = static_cast<int>(s.u.size());
  for (int dir = 0; dir < opts.n_dirs; ++dir) {
    Eigen::VectorXd du = Eigen::VectorXd::Zero(s.u.size());
    Eigen::VectorXd dv = Eigen::VectorXd::Zero(s.v.size());
    for (int kk = 0; kk < solver.num_dofs(); ++kk) {
      if (solver.free_index(kk) < 0) continue;
      (kk < nu ? du(kk) : dv(kk - nu)) = unif(rng);
    }
    std::vector<DeviatoricTensor> dp(s.p.size());
    if (!opts.zero_plastic)
      for (auto& q : dp) q = DeviatoricTensor(unif(rng), unif(rng), unif(rng), unif(rng), unif(rng));
    for (double amp : opts.amplitudes) {
      PlateState c = s;
      c.u += amp * du;
      c.v += amp * dv;
      if (!opts.zero_plastic)
        for (std::size_t i = 0; i < c.p.size(); ++i) c.p[i] = s.p[i] + dp[i] * amp;
      worst = std::min(worst, margin(c));
    }
  }

  if (opts.informed && !opts.zero_plastic) {
    PlateState target = s;
    evo.update_plastic(target, s.p);
    std::vector<double> amps = opts.amplitudes;
    amps.push_back(1.0);
    for (double amp : amps) {
      PlateState c = s;
      for (std::size_t i = 0; i < c.p.size(); ++i) c.p[i] = s.p[i] + (target.p[i] - s.p[i]) * amp;
      evo.minimize_elastic(c);
      worst = std::min(worst, margin(c));
    }
  }
  if (opts.informed) {
    PlateState c = s;
    evo.minimize_elastic(c);
    worst = std::min(worst, margin(c));
  }
  return worst;
}

struct FieldNorms {
  double u = 0.0;  // L2 of u and grad u
  double v = 0.0;  // L2 of v, grad v and hess v
  double p = 0.0;  // L2 over the plate volume
  double max() const { return std::max({u, v, p}); }
};

/// Quadrature-based norms of the difference a - b.
inline FieldNorms field_distance(const Discretization& disc, const PlateState& a,
                                 const PlateState& b) {
  const Grid& g = disc.grid();
  if (!a.compatible_with(g) || !b.compatible_with(g))
    throw GridMismatch("field_distance: states do not match grid");
  const Eigen::VectorXd du = a.u - b.u;
  const Eigen::VectorXd dv = a.v - b.v;
  double su = 0.0, sv = 0.0, sp = 0.0;
  for_each_inplane_point(g, [&](int ci, int cj, int gp) {
    const PointBasis& bs = disc.basis(gp);
    const auto nodes = disc.cell_nodes(ci, cj);
    double u1 = 0, u2 = 0, v = 0;
    for (int c = 0; c < 4; ++c) {
      u1 += bs.n[c] * du(2 * nodes[c]);
      u2 += bs.n[c] * du(2 * nodes[c] + 1);
      for (int m = 0; m < 4; ++m) v += bs.w[4 * c + m] * dv(4 * nodes[c] + m);
    }
    const PointKinematics k = point_kinematics(disc, du, dv, ci, cj, gp);
    const double w = g.gp_weight(gp);
    // Full gradient of u: sym part from the kinematics plus the rotation.
    double ux1 = 0, ux2 = 0, uy1 = 0, uy2 = 0;
    for (int c = 0; c < 4; ++c) {
      ux1 += bs.n_x[c] * du(2 * nodes[c]);
      ux2 += bs.n_y[c] * du(2 * nodes[c]);
      uy1 += bs.n_x[c] * du(2 * nodes[c] + 1);
      uy2 += bs.n_y[c] * du(2 * nodes[c] + 1);
    }
    su += w * (u1 * u1 + u2 * u2 + ux1 * ux1 + ux2 * ux2 + uy1 * uy1 + uy2 * uy2);
    sv += w * (v * v + k.grad_v.squaredNorm() + k.hess_v(0, 0) * k.hess_v(0, 0) +
               k.hess_v(1, 1) * k.hess_v(1, 1) + 2.0 * k.hess_v(0, 1) * k.hess_v(0, 1));
    for (int layer = 0; layer < g.nz(); ++layer) {
      const int i = g.point_index(g.cell(ci, cj), gp, layer);
      sp += w * g.layer_weight(layer) * (a.p[i] - b.p[i]).norm_sq();
    }
  });
  return {std::sqrt(su), std::sqrt(sv), std::sqrt(sp)};
}

// ---------------------------------------------------------------------------
// Time loop

struct EvolutionOptions {
  int stability_dirs = 0;  // 0 disables the per-knot stability check
  bool el_check = false;
  bool keep_states = false;
  std::uint64_t seed = 0;
};

struct EvolutionResult {
  EvolutionTrace trace;
  std::vector<PlateState> states;  // filled when keep_states is set
  PlateState final_state;
};

using StepObserver = std::function<void(const TraceRow&, const PlateState&)>;

/// Runs the incremental scheme over the partition. The initial state is one
/// incremental step at t = 0 from the zero state. Step failures are
/// rethrown as StepError after the observer has seen every completed row.
inline EvolutionResult run_evolution(const Evolution& evo, const TimePartition& part,
                                     const EvolutionOptions& opts = {},
                                     const StepObserver& observer = {}) {
  if (std::abs(part.horizon() - evo.trajectory().horizon()) >
      1e-12 * evo.trajectory().horizon())
    throw InvalidArgument("partition horizon differs from the loading horizon");
  EvolutionResult out;
  const auto& knots = part.knots();
  PlateState state = PlateState::zero(evo.grid());
  double e0 = 0.0, diss = 0.0, work = 0.0;
  for (int i = 0; i <= part.steps(); ++i) {
    const double t = knots[i];
    StepResult step;
    try {
      step = incremental_step(evo, state, t);
    } catch (const Error& e) {
      throw StepError(i, e.what());
    }
    TraceRow row;
    row.step = i;
    row.t = t;
    row.inner_iters = step.inner_iters;
    if (i > 0) {
      diss += dissipation_increment(evo.grid(), step.state.p, state.p, evo.models().d);
      work += evo.work_increment(step.state, knots[i - 1], t);
    }
    const EnergyParts en = evo.energy(step.state);
    if (i == 0) e0 = en.total();
    row.elastic = en.elastic;
    row.hardening = en.hardening;
    row.dissipation_cum = diss;
    row.work_cum = work;
    row.balance_residual = en.total() + diss - e0 - work;
    if (opts.stability_dirs > 0) {
      StabilityOptions so;
      so.n_dirs = opts.stability_dirs;
      so.seed = opts.seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(i + 1);
      row.stability_margin = check_stability(evo, step.state, so);
    }
    if (opts.el_check) row.el_residual = check_euler_lagrange(evo, step.state);
    state = std::move(step.state);
    out.trace.push_back(row);
    if (opts.keep_states) out.states.push_back(state);
    if (observer) observer(row, state);
  }
  out.final_state = std::move(state);
  return out;
}

// ---------------------------------------------------------------------------
// Refinement studies

struct BalanceReport {
  std::vector<double> residuals;  // fine partition
  double max_coarse = 0.0;
  double max_fine = 0.0;
  double slope = 0.0;  // C in r = C tau + r0
  int flagged = 0;
};

inline double max_balance_residual(const EvolutionTrace& trace) {
  double m = 0.0;
  for (const auto& r : trace) m = std::max(m, std::abs(r.balance_residual));
  return m;
}

/// Residuals of the fine trace, with C estimated from the coarse/fine pair
/// and knots flagged where r exceeds fit_margin C tau + delta T + slack or
/// falls below -slack. With fit_margin = 1.5 a knot at the maximum passes
/// iff halving tau reduces the maximum by a factor of at most 0.6.
inline BalanceReport check_energy_balance(const EvolutionTrace& coarse, double tau_coarse,
                                          const EvolutionTrace& fine, double tau_fine,
                                          const SolverTolerances& tol, double slack = 1e-8,
                                          double fit_margin = 1.5) {
  BalanceReport rep;
  rep.max_coarse = max_balance_residual(coarse);
  rep.max_fine = max_balance_residual(fine);
  rep.slope = std::max(0.0, (rep.max_coarse - rep.max_fine) / (tau_coarse - tau_fine));
  const double T = fine.empty() ? 0.0 : fine.back().t;
  for (const auto& r : fine) {
    rep.residuals.push_back(r.balance_residual);
    if (r.balance_residual > fit_margin * rep.slope * tau_fine + tol.delta * T + slack ||
        r.balance_residual < -slack)
      ++rep.flagged;
  }
  return rep;
}

/// Runs the reparametrized loading on the original knots and the plain
/// loading on the image knots, and returns the largest field distance at
/// corresponding knots.
inline double rate_independence_test(const Grid& grid, const Models& models,
                                     const BoundaryTrajectory& traj,
                                     const SolverTolerances& tol, const TimePartition& part,
                                     Reparam reparam) {
  EvolutionOptions opts;
  opts.keep_states = true;
  const Evolution base(grid, models, traj.with_reparam(Reparam::None), tol);
  const Evolution re(grid, models, traj.with_reparam(reparam), tol);
  const auto a = run_evolution(re, part, opts);
  const auto b = run_evolution(base, part.mapped(reparam), opts);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.states.size(); ++i)
    worst = std::max(worst, field_distance(base.discretization(), a.states[i], b.states[i]).max());
  return worst;
}

/// Runs the reparametrized loading and the plain loading on the same
/// uniform partition of N steps and returns the field distance of the two
/// final states, where both loadings coincide. The knots of the two runs
/// map to different loading values, so the distance measures the time
/// discretization error, O(tau).
inline double reparam_discrepancy(const Grid& grid, const Models& models,
                                  const BoundaryTrajectory& traj,
                                  const SolverTolerances& tol, int steps, Reparam reparam) {
  const Evolution base(grid, models, traj.with_reparam(Reparam::None), tol);
  const Evolution re(grid, models, traj.with_reparam(reparam), tol);
  const TimePartition part = TimePartition::uniform(traj.horizon(), steps);
  const auto a = run_evolution(re, part);
  const auto b = run_evolution(base, part);
  return field_distance(base.discretization(), a.final_state, b.final_state).max();
}

/// Largest difference quotients |z_i - z_{i-1}| / (t_i - t_{i-1}) per field.
inline FieldNorms lipschitz_report(const Discretization& disc, const EvolutionTrace& trace,
                                   const std::vector<PlateState>& states) {
  if (states.size() != trace.size())
    throw InvalidArgument("lipschitz_report needs one state per trace row");
  FieldNorms q;
  for (std::size_t i = 1; i < states.size(); ++i) {
    const double dt = trace[i].t - trace[i - 1].t;
    const FieldNorms d = field_distance(disc, states[i], states[i - 1]);
    q.u = std::max(q.u, d.u / dt);
    q.v = std::max(q.v, d.v / dt);
    q.p = std::max(q.p, d.p / dt);
  }
  return q;
}

/// Largest norm of the deviatoric gradient of the smooth local energy at
/// p = 0 over all quadrature points: the yield threshold of the state.
inline double peak_driving_force(const Evolution& evo, const PlateState& s) {
  const auto e = assemble_strain(evo.discretization(), s, evo.models().alpha);
  double m = 0.0;
  for (const Sym2& ei : e)
    m = std::max(m, evo.local_problem().smooth_gradient_matrix_coords(ei, DeviatoricTensor()).norm());
  return m;
}

}  // namespace plateplast
