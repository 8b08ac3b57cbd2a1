#include <gtest/gtest.h>

#include "oracles.hpp"
#include "plateplast/evolution.hpp"

#include <random>

using namespace plateplast;
namespace pt = plateplast::testing;

namespace {

Models unit_models(double sigma_y, Alpha alpha = Alpha::Linear) {
  return {IsotropicElasticity(1, 1), HardeningForm::isotropic(1),
          DissipationDensity::frobenius(sigma_y), alpha};
}

Grid small_grid(unsigned gd = kLeft | kRight) { return Grid(1, 1, 6, 6, 3, gd); }

}  // namespace

TEST(TimePartition, UniformKnotsAndTau) {
  const auto p = TimePartition::uniform(2.0, 8);
  EXPECT_EQ(p.steps(), 8);
  EXPECT_EQ(p.knots().front(), 0.0);
  EXPECT_EQ(p.knots().back(), 2.0);
  EXPECT_NEAR(p.tau(), 0.25, 1e-15);
}

TEST(TimePartition, RejectsBadKnots) {
  EXPECT_THROW(TimePartition({0.0}), InvalidArgument);
  EXPECT_THROW(TimePartition({0.1, 1.0}), InvalidArgument);
  EXPECT_THROW(TimePartition({0.0, 0.5, 0.5, 1.0}), InvalidArgument);
  EXPECT_THROW(TimePartition::uniform(1.0, 0), InvalidArgument);
}

TEST(TimePartition, MappedKnotsAreImages) {
  const auto p = TimePartition::uniform(2.0, 4).mapped(Reparam::Square);
  EXPECT_DOUBLE_EQ(p.knots()[1], 2.0 * 0.25 * 0.25);
  EXPECT_EQ(p.knots().back(), 2.0);
}

TEST(SolverTolerances, Validation) {
  SolverTolerances t;
  EXPECT_NO_THROW(t.validate());
  t.delta = -1;
  EXPECT_THROW(t.validate(), InvalidArgument);
  t = {};
  t.alt_max = 0;
  EXPECT_THROW(t.validate(), InvalidArgument);
}

TEST(MinimizeElastic, ZeroDataGivesZero) {
  const Grid g = small_grid();
  const Evolution evo(g, unit_models(0.1), BoundaryTrajectory::zero(1.0));
  PlateState s = PlateState::zero(g);
  evo.minimize_elastic(s);
  EXPECT_EQ(s.u.norm(), 0.0);
  EXPECT_EQ(s.v.norm(), 0.0);
}

TEST(MinimizeElastic, LinearSolutionIndependentOfStart) {
  const Grid g = small_grid();
  const Evolution evo(g, unit_models(0.1), BoundaryTrajectory::bend(0.3, TimeProfile::linear(1)));
  std::mt19937_64 rng(2);
  PlateState a = apply_boundary(g, PlateState::zero(g), evo.trajectory(), 0.7);
  for (auto& p : a.p) p = pt::random_deviatoric(rng, 0.05);
  PlateState b = a;
  std::uniform_real_distribution<double> d(-1, 1);
  for (int k = 0; k < b.u.size(); ++k)
    if (evo.elastic_solver().free_index(k) >= 0) b.u(k) = d(rng);
  evo.minimize_elastic(a);
  evo.minimize_elastic(b);
  EXPECT_LT(field_distance(evo.discretization(), a, b).max(), 1e-10);
}

TEST(IncrementalStep, FrozenLoadingKeepsState) {
  const Grid g = small_grid();
  const auto traj = BoundaryTrajectory::bend(0.3, TimeProfile::ramp_hold(1.0, 0.5));
  const Evolution evo(g, unit_models(0.1), traj);
  EvolutionOptions opts;
  opts.keep_states = true;
  const auto run = run_evolution(evo, TimePartition({0.0, 0.25, 0.5, 1.0}), opts);
  const PlateState& held = run.states[2];
  const StepResult next = incremental_step(evo, held, 0.75);
  // The alternation stops on a relative objective decrease of alt_tol, so
  // fields are converged to about sqrt(alt_tol) in relative terms.
  EXPECT_EQ(next.inner_iters, 1);
  const Discretization& disc = evo.discretization();
  EXPECT_LT(field_distance(disc, next.state, held).max(),
            1e-4 * field_distance(disc, held, PlateState::zero(g)).max());
}

TEST(IncrementalStep, LargeYieldStressIsElastic) {
  const Grid g = small_grid();
  const auto traj = BoundaryTrajectory::bend(0.3, TimeProfile::linear(1));
  const Evolution evo(g, unit_models(1e6), traj);
  const StepResult r = incremental_step(evo, PlateState::zero(g), 1.0);
  for (const auto& p : r.state.p) EXPECT_EQ(p, DeviatoricTensor());
  PlateState elastic = apply_boundary(g, PlateState::zero(g), traj, 1.0);
  evo.minimize_elastic(elastic);
  EXPECT_LT(field_distance(evo.discretization(), r.state, elastic).max(), 1e-12);
  const auto e = assemble_strain(evo.discretization(), r.state, Alpha::Linear);
  for (std::size_t i = 0; i < e.size(); ++i)
    EXPECT_EQ(optimality_residual(evo.local_problem(), e[i], r.state.p[i], DeviatoricTensor()),
              0.0);
}

TEST(IncrementalStep, HomogeneousStretchFollowsPointwiseUpdate) {
  // All edges clamped with u0 = (a x1, 0): the plate stays homogeneous and
  // every point solves the same local problem at E = diag(a, 0).
  const Grid g(1, 1, 4, 4, 2, kLeft | kRight | kBottom | kTop);
  const double a = 0.5;
  const Models m = unit_models(0.2);
  const auto traj = BoundaryTrajectory::stretch(a, TimeProfile::linear(1));
  const Evolution evo(g, m, traj);
  const StepResult r = incremental_step(evo, PlateState::zero(g), 1.0);
  const LocalResult local = prox_update(evo.local_problem(), Sym2(a, 0, 0), DeviatoricTensor());
  EXPECT_GT(local.p.norm(), 0.0);
  for (const auto& p : r.state.p)
    EXPECT_LT((p - local.p).norm(), 1e-9);
  EXPECT_LT((r.state.u - evo.lifting().u).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(IncrementalStep, ObjectiveNotAboveFirstElasticSolve) {
  const Grid g = small_grid();
  const Evolution evo(g, unit_models(0.05, Alpha::VonKarman),
                      BoundaryTrajectory::bend(0.3, TimeProfile::linear(1)));
  PlateState start = apply_boundary(g, PlateState::zero(g), evo.trajectory(), 1.0);
  evo.minimize_elastic(start);
  const StepResult r = incremental_step(evo, PlateState::zero(g), 1.0);
  EXPECT_LE(r.objective, evo.objective(start, start.p) + 1e-15);
  EXPECT_TRUE(r.converged);
}

TEST(IncrementalStep, FailuresCarryStepIndex) {
  const Grid g = small_grid();
  SolverTolerances tol;
  tol.local_max_iter = 1;
  const Evolution evo(g, unit_models(0.05), BoundaryTrajectory::bend(0.4, TimeProfile::linear(1)),
                      tol);
  try {
    run_evolution(evo, TimePartition::uniform(1, 4));
    FAIL() << "expected a step failure";
  } catch (const StepError& e) {
    EXPECT_GT(e.step(), 0u);
  }
}

TEST(RunEvolution, ZeroLoadingGivesZeroTrace) {
  const Grid g = small_grid();
  const Evolution evo(g, unit_models(0.1), BoundaryTrajectory::zero(1.0));
  EvolutionOptions opts;
  opts.el_check = true;
  const auto r = run_evolution(evo, TimePartition::uniform(1, 5), opts);
  ASSERT_EQ(r.trace.size(), 6u);
  for (const auto& row : r.trace) {
    EXPECT_EQ(row.elastic, 0.0);
    EXPECT_EQ(row.hardening, 0.0);
    EXPECT_EQ(row.dissipation_cum, 0.0);
    EXPECT_EQ(row.work_cum, 0.0);
    EXPECT_EQ(row.balance_residual, 0.0);
    EXPECT_EQ(row.el_residual, 0.0);
  }
}

TEST(RunEvolution, ElasticRegimeEnergyScalesWithLoadSquared) {
  const Grid g = small_grid();
  const Evolution evo(g, unit_models(1e6), BoundaryTrajectory::bend(0.3, TimeProfile::linear(2)));
  const auto r = run_evolution(evo, TimePartition::uniform(2, 8));
  const double e_end = r.trace.back().elastic;
  for (const auto& row : r.trace) {
    const double s = row.t / 2.0;
    EXPECT_NEAR(row.elastic, s * s * e_end, 1e-13);
    EXPECT_EQ(row.dissipation_cum, 0.0);
  }
}

TEST(RunEvolution, Deterministic) {
  const Grid g = small_grid();
  const Evolution evo(g, unit_models(0.05, Alpha::VonKarman),
                      BoundaryTrajectory::bend(0.3, TimeProfile::linear(1)));
  EvolutionOptions opts;
  opts.stability_dirs = 3;
  opts.el_check = true;
  const auto a = run_evolution(evo, TimePartition::uniform(1, 4), opts);
  const auto b = run_evolution(evo, TimePartition::uniform(1, 4), opts);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    EXPECT_EQ(a.trace[i].elastic, b.trace[i].elastic);
    EXPECT_EQ(a.trace[i].work_cum, b.trace[i].work_cum);
    EXPECT_EQ(a.trace[i].stability_margin, b.trace[i].stability_margin);
  }
  EXPECT_EQ(a.final_state, b.final_state);
}

TEST(RunEvolution, DissipationIsCumulativeSum) {
  const Grid g = small_grid();
  const Evolution evo(g, unit_models(0.05), BoundaryTrajectory::bend(0.4, TimeProfile::linear(1)));
  EvolutionOptions opts;
  opts.keep_states = true;
  const auto r = run_evolution(evo, TimePartition::uniform(1, 6), opts);
  double sum = 0.0;
  for (std::size_t i = 1; i < r.states.size(); ++i) {
    sum += dissipation_increment(g, r.states[i].p, r.states[i - 1].p, evo.models().d);
    EXPECT_DOUBLE_EQ(r.trace[i].dissipation_cum, sum);
    EXPECT_GE(r.trace[i].dissipation_cum, r.trace[i - 1].dissipation_cum);
  }
  EXPECT_GT(sum, 0.0);
  for (const auto& row : r.trace) EXPECT_GE(row.elastic + row.hardening, 0.0);
}

TEST(RunEvolution, ObserverSeesEveryRow) {
  const Grid g = small_grid();
  const Evolution evo(g, unit_models(0.1), BoundaryTrajectory::bend(0.2, TimeProfile::linear(1)));
  int seen = 0;
  run_evolution(evo, TimePartition::uniform(1, 3), {},
                [&](const TraceRow& row, const PlateState&) { EXPECT_EQ(row.step, seen++); });
  EXPECT_EQ(seen, 4);
}

TEST(RunEvolution, HorizonMismatchRejected) {
  const Grid g = small_grid();
  const Evolution evo(g, unit_models(0.1), BoundaryTrajectory::bend(0.2, TimeProfile::linear(1)));
  EXPECT_THROW(run_evolution(evo, TimePartition::uniform(2, 3)), InvalidArgument);
}

TEST(EnergyBalance, ResidualOneSidedAndFirstOrder) {
  const Grid g = small_grid();
  const Evolution evo(g, unit_models(0.05), BoundaryTrajectory::bend(0.3, TimeProfile::linear(1)));
  const auto coarse = run_evolution(evo, TimePartition::uniform(1, 5));
  const auto fine = run_evolution(evo, TimePartition::uniform(1, 10));
  for (const auto& row : fine.trace) EXPECT_GE(row.balance_residual, -1e-10);
  const BalanceReport rep = check_energy_balance(coarse.trace, 0.2, fine.trace, 0.1, {});
  EXPECT_LT(rep.max_fine, 0.6 * rep.max_coarse);
  EXPECT_GT(rep.slope, 0.0);
  EXPECT_EQ(rep.flagged, 0);
}

TEST(EnergyBalance, ElasticRegimeResidualHalvesWithStep) {
  const Grid g = small_grid();
  const Evolution evo(g, unit_models(1e6), BoundaryTrajectory::bend(0.3, TimeProfile::linear(1)));
  const double r1 = max_balance_residual(run_evolution(evo, TimePartition::uniform(1, 4)).trace);
  const double r2 = max_balance_residual(run_evolution(evo, TimePartition::uniform(1, 8)).trace);
  EXPECT_GT(r1, 0.0);
  EXPECT_NEAR(r2 / r1, 0.5, 1e-6);
}

TEST(EnergyBalance, ZeroLoading) {
  const Grid g = small_grid();
  const Evolution evo(g, unit_models(0.1), BoundaryTrajectory::zero(1));
  const auto r = run_evolution(evo, TimePartition::uniform(1, 3));
  const BalanceReport rep = check_energy_balance(r.trace, 1.0 / 3, r.trace, 1.0 / 3, {});
  for (double x : rep.residuals) EXPECT_EQ(x, 0.0);
}

TEST(Stability, ElasticSolutionZeroPlasticPerturbations) {
  const Grid g = small_grid();
  const Evolution evo(g, unit_models(1e6), BoundaryTrajectory::bend(0.3, TimeProfile::linear(1)));
  PlateState s = apply_boundary(g, PlateState::zero(g), evo.trajectory(), 1.0);
  evo.minimize_elastic(s);
  StabilityOptions opts;
  opts.n_dirs = 20;
  opts.zero_plastic = true;
  EXPECT_GE(check_stability(evo, s, opts), -1e-12);
}

TEST(Stability, ConvergedPlasticStateIsStable) {
  const Grid g = small_grid();
  for (Alpha al : {Alpha::Linear, Alpha::VonKarman}) {
    const Evolution evo(g, unit_models(0.05, al),
                        BoundaryTrajectory::bend(0.3, TimeProfile::linear(1)));
    const auto r = run_evolution(evo, TimePartition::uniform(1, 4));
    StabilityOptions opts;
    opts.n_dirs = 10;
    EXPECT_GE(check_stability(evo, r.final_state, opts), -1e-8);
  }
}

TEST(Stability, CorruptedStateDetected) {
  const Grid g = small_grid();
  const Evolution evo(g, unit_models(0.05), BoundaryTrajectory::bend(0.3, TimeProfile::linear(1)));
  const auto r = run_evolution(evo, TimePartition::uniform(1, 4));
  PlateState bad = r.final_state;
  for (auto& p : bad.p) p = p * 2.0;
  evo.minimize_elastic(bad);
  StabilityOptions opts;
  opts.n_dirs = 5;
  EXPECT_LT(check_stability(evo, bad, opts), 0.0);
}

TEST(EulerLagrange, ConvergedLinearState) {
  const Grid g = small_grid();
  const Evolution evo(g, unit_models(0.05), BoundaryTrajectory::bend(0.3, TimeProfile::linear(1)));
  const auto r = run_evolution(evo, TimePartition::uniform(1, 4));
  EXPECT_LE(check_euler_lagrange(evo, r.final_state), 1e-8);
}

TEST(EulerLagrange, RandomStateIsOrderOne) {
  const Grid g = small_grid();
  const Evolution evo(g, unit_models(0.05), BoundaryTrajectory::bend(0.3, TimeProfile::linear(1)));
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> d(-1, 1);
  PlateState s = PlateState::zero(g);
  for (int k = 0; k < s.u.size(); ++k) s.u(k) = d(rng);
  for (int k = 0; k < s.v.size(); ++k) s.v(k) = d(rng);
  EXPECT_GT(check_euler_lagrange(evo, s), 0.05);
  EXPECT_LE(check_euler_lagrange(evo, s), 1.0 + 1e-12);
}

TEST(EulerLagrange, ZeroState) {
  const Grid g = small_grid();
  const Evolution evo(g, unit_models(0.05), BoundaryTrajectory::zero(1));
  EXPECT_EQ(check_euler_lagrange(evo, PlateState::zero(g)), 0.0);
}

TEST(RateIndependence, ImagePartitionIsBitIdentical) {
  const Grid g = small_grid();
  const auto traj = BoundaryTrajectory::bend(0.3, TimeProfile::linear(1));
  for (Reparam r : {Reparam::Square, Reparam::SmoothStep})
    EXPECT_EQ(rate_independence_test(g, unit_models(0.05), traj, {}, TimePartition::uniform(1, 5), r),
              0.0);
}

TEST(RateIndependence, ElasticRegimeDependsOnLoadOnly) {
  const Grid g = small_grid();
  const auto traj = BoundaryTrajectory::bend(0.3, TimeProfile::linear(1));
  EXPECT_LE(reparam_discrepancy(g, unit_models(1e6), traj, {}, 4, Reparam::Square), 1e-10);
}

TEST(RateIndependence, IndependentPartitionsConverge) {
  const Grid g = small_grid();
  const auto traj = BoundaryTrajectory::bend(0.3, TimeProfile::linear(1));
  const double d1 = reparam_discrepancy(g, unit_models(0.05), traj, {}, 10, Reparam::Square);
  const double d2 = reparam_discrepancy(g, unit_models(0.05), traj, {}, 20, Reparam::Square);
  EXPECT_GT(d1, 0.0);
  EXPECT_LT(d2, 0.75 * d1);
}

TEST(Lipschitz, FrozenLoadingGivesZero) {
  const Grid g = small_grid();
  const auto traj = BoundaryTrajectory::bend(0.3, TimeProfile::ramp_hold(1.0, 0.5));
  const Evolution evo(g, unit_models(0.05), traj);
  EvolutionOptions opts;
  opts.keep_states = true;
  const auto r = run_evolution(evo, TimePartition({0.0, 0.5, 0.75, 1.0}), opts);
  const EvolutionTrace tail(r.trace.begin() + 1, r.trace.end());
  const std::vector<PlateState> states(r.states.begin() + 1, r.states.end());
  const FieldNorms q = lipschitz_report(evo.discretization(), tail, states);
  const FieldNorms ramp = lipschitz_report(evo.discretization(), r.trace, r.states);
  EXPECT_LT(q.max(), 1e-4 * ramp.max());
}

TEST(Lipschitz, ElasticLinearLoadingConstantAcrossRefinement) {
  const Grid g = small_grid();
  const Evolution evo(g, unit_models(1e6), BoundaryTrajectory::bend(0.3, TimeProfile::linear(1)));
  EvolutionOptions opts;
  opts.keep_states = true;
  const auto a = run_evolution(evo, TimePartition::uniform(1, 3), opts);
  const auto b = run_evolution(evo, TimePartition::uniform(1, 6), opts);
  const FieldNorms qa = lipschitz_report(evo.discretization(), a.trace, a.states);
  const FieldNorms qb = lipschitz_report(evo.discretization(), b.trace, b.states);
  EXPECT_NEAR(qa.v, qb.v, 1e-10 * qa.v);
  EXPECT_GT(qa.v, 0.0);
}

TEST(FieldDistance, ZeroForEqualStatesAndRejectsMismatch) {
  const Grid g = small_grid();
  const Discretization disc(g);
  EXPECT_EQ(field_distance(disc, PlateState::zero(g), PlateState::zero(g)).max(), 0.0);
  EXPECT_THROW(field_distance(disc, PlateState::zero(g), PlateState::zero(Grid(1, 1, 4, 4, 2, kLeft))),
               GridMismatch);
}
