#include <gtest/gtest.h>

#include "plateplast/config.hpp"

#include <filesystem>
#include <fstream>

using namespace plateplast;

TEST(ParseConfig, EmptyTextGivesDefaults) {
  const RunConfig c = parse_config("");
  EXPECT_EQ(c, RunConfig{});
  EXPECT_EQ(c.grid.nx, 8);
  EXPECT_EQ(c.grid.gamma_d, kLeft | kRight);
  EXPECT_EQ(c.alpha, Alpha::Linear);
  EXPECT_EQ(c.material.sigma_y, 0.1);
  EXPECT_EQ(c.time.steps, 10);
  EXPECT_EQ(c.solver, SolverTolerances{});
}

TEST(ParseConfig, VonKarmanAlpha) {
  const RunConfig c = parse_config("[model]\nalpha = vonkarman\n");
  EXPECT_EQ(c.alpha, Alpha::VonKarman);
  EXPECT_EQ(l_alpha(c.alpha), 1.0);
}

TEST(ParseConfig, NegativeYieldStressIsValidationError) {
  try {
    parse_config("[material]\nsigma_y = -1\n");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.key(), "material.sigma_y");
    EXPECT_NE(std::string(e.what()).find("sigma_y must be > 0"), std::string::npos);
  }
  EXPECT_THROW(parse_config("[material]\nsigma_y = 0\n"), ValidationError);
}

TEST(ParseConfig, UnknownKeyIsLocatedParseError) {
  try {
    parse_config("[grid]\nnx = 8\n\nnyy = 8\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4);
    EXPECT_EQ(e.key(), "grid.nyy");
  }
}

TEST(ParseConfig, SyntaxErrors) {
  EXPECT_THROW(parse_config("[grid\n"), ParseError);
  EXPECT_THROW(parse_config("[nosuch]\n"), ParseError);
  EXPECT_THROW(parse_config("nx = 8\n"), ParseError);
  EXPECT_THROW(parse_config("[grid]\nnx 8\n"), ParseError);
  EXPECT_THROW(parse_config("[grid]\nnx = 8\nnx = 9\n"), ParseError);
  EXPECT_THROW(parse_config("[grid]\nnx = eight\n"), ParseError);
  EXPECT_THROW(parse_config("[grid]\nlx = 1.0x\n"), ParseError);
  EXPECT_THROW(parse_config("[grid]\ngamma_d = left, middle\n"), ParseError);
  EXPECT_THROW(parse_config("[output]\nplotdata = yes\n"), ParseError);
  EXPECT_THROW(parse_config("[loading]\nv = 0.2 2\n"), ParseError);
  EXPECT_THROW(parse_config("[loading]\nv = 0.2 1.5 0\n"), ParseError);
  EXPECT_THROW(parse_config("[output]\nsnapshots = 1, x\n"), ParseError);
}

TEST(ParseConfig, CommentsAndWhitespace) {
  const RunConfig c = parse_config("# header\n  [grid]  \n nx = 12 # trailing\n\n");
  EXPECT_EQ(c.grid.nx, 12);
}

TEST(ParseConfig, RangeChecks) {
  EXPECT_THROW(parse_config("[grid]\nnx = 3\n"), ValidationError);
  EXPECT_THROW(parse_config("[grid]\nnx = 65\n"), ValidationError);
  EXPECT_THROW(parse_config("[grid]\nnz = 1\n"), ValidationError);
  EXPECT_THROW(parse_config("[grid]\ngamma_d =\n"), ValidationError);
  EXPECT_THROW(parse_config("[material]\nmu = 0\n"), ValidationError);
  EXPECT_THROW(parse_config("[time]\nsteps = 0\n"), ValidationError);
  EXPECT_THROW(parse_config("[time]\nsteps = 201\n"), ValidationError);
  EXPECT_THROW(parse_config("[time]\nknots = 0, 0.5, 0.4, 1\n"), ValidationError);
  EXPECT_THROW(parse_config("[time]\nknots = 0, 0.5\n"), ValidationError);
  EXPECT_THROW(parse_config("[time]\nsteps = 4\nknots = 0, 1\n"), ValidationError);
  EXPECT_THROW(parse_config("[solver]\nalt_max = 0\n"), ValidationError);
  EXPECT_THROW(parse_config("[loading]\nprofile = ramp_hold\nt_ramp = 2\n"), ValidationError);
  EXPECT_THROW(parse_config("[loading]\nprofile = piecewise\nbreakpoints = 0 0; 0.5 1\n"),
               ValidationError);
  EXPECT_THROW(parse_config("[output]\nsnapshots = 11\n"), ValidationError);
  EXPECT_THROW(parse_config("[dissipation]\nmatrices = -1 0 0 0 1 0 0 0 1\n"), ValidationError);
}

TEST(ParseConfig, CommandSpecificValidation) {
  RunConfig c = parse_config("[material]\nh_mode = gauge\n");
  EXPECT_THROW(validate_for(c, Command::Simulate), ValidationError);
  c.dissipation.random = 2;
  EXPECT_NO_THROW(validate_for(c, Command::Dissipation));
  c = RunConfig{};
  EXPECT_THROW(validate_for(c, Command::Dissipation), ValidationError);
  c.check.nodal = "/nonexistent/nodal.csv";
  c.check.points = "/nonexistent/points.csv";
  EXPECT_THROW(validate_for(c, Command::Check), ValidationError);
}

TEST(ParseConfig, CheckFilesResolvedAtValidation) {
  const auto dir = std::filesystem::temp_directory_path() / "plateplast_cfg_test";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "n.csv") << "x\n";
  std::ofstream(dir / "p.csv") << "x\n";
  RunConfig c;
  c.check.nodal = (dir / "n.csv").string();
  c.check.points = (dir / "p.csv").string();
  c.check.t = 1.0;
  EXPECT_NO_THROW(validate_for(c, Command::Check));
  c.check.t = 2.0;
  EXPECT_THROW(validate_for(c, Command::Check), ValidationError);
  std::filesystem::remove_all(dir);
}

TEST(SerializeConfig, RoundTripOfDefaults) {
  const RunConfig c;
  EXPECT_EQ(parse_config(serialize_config(c)), c);
}

TEST(SerializeConfig, RoundTripOfEveryField) {
  const std::string text = R"(
[grid]
lx = 2.5
ly = 0.75
nx = 10
ny = 6
nz = 3
gamma_d = left, top
inplane_order = 4
[model]
alpha = vonkarman
[material]
lam = 0.3
mu = 1.7
k = 0.1
sigma_y = 0.123456789012345678
h_mode = gauge
gauge_directions = 1 0 0 0 0; 0 1 0 0 0; 0 0 1 0 0; 0 0 0 1 0; 0 0 0 0 1; 1 1 0 0 0
[loading]
family = poly
amplitude = 0.3
u1 = 0.1 1 0; -0.2 0 1
u2 = 0.05 1 1
v = 0.2 2 0; 0.01 3 1
profile = piecewise
breakpoints = 0 0; 0.3 0.7; 0.9 0.2; 1.2 1
T = 1.2
reparam = smoothstep
[time]
knots = 0, 0.1, 0.35, 1.2
[solver]
delta = 1e-6
alt_tol = 1e-9
alt_max = 50
newton_tol = 1e-11
newton_max = 30
local_tol = 1e-11
local_max_iter = 500
[output]
dir = some/where
snapshots = 0, 2
plotdata = false
[diagnostics]
seed = 12345678901
stability_dirs = 7
stability_threshold = 1e-6
el_check = true
el_threshold = 1e-9
energy_balance = true
balance_slack = 1e-7
rate_independence = square
rate_threshold = 1e-12
lipschitz = true
[dissipation]
n_segments = 4
max_evals = 500
penalty = 3.5
restarts = 2
matrices = 1 0.1 0 0 1 0 0 0 1; 2 0 0 0 0.5 0 0 0 1
random = 5
random_radius = 0.25
c_k = 7
[check]
t = 0.6
)";
  const RunConfig c = parse_config(text);
  EXPECT_EQ(c.loading.breakpoints.size(), 4u);
  EXPECT_EQ(c.dissipation.matrices.size(), 2u);
  EXPECT_EQ(c.material.gauge_directions.size(), 6u);
  EXPECT_EQ(c.diagnostics.seed, 12345678901ULL);
  EXPECT_EQ(c.material.sigma_y, 0.123456789012345678);
  const RunConfig back = parse_config(serialize_config(c));
  EXPECT_EQ(back, c);
  EXPECT_EQ(serialize_config(back), serialize_config(c));
}

TEST(Builders, TrajectoryFamilies) {
  RunConfig c;
  c.loading.family = LoadingConfig::Family::Bend;
  c.loading.amplitude = 0.2;
  BoundaryTrajectory t = make_trajectory(c);
  EXPECT_DOUBLE_EQ(t.v().value(0.5, 0.3), 0.05);
  EXPECT_DOUBLE_EQ(t.s(0.25), 0.25);
  c.loading.family = LoadingConfig::Family::Stretch;
  t = make_trajectory(c);
  EXPECT_DOUBLE_EQ(t.u1().value(0.5, 0.0), 0.1);
  c.loading.family = LoadingConfig::Family::Zero;
  EXPECT_TRUE(make_trajectory(c).is_zero());
  c.loading.family = LoadingConfig::Family::Poly;
  c.loading.v = {{{0.5, 1, 2}}};
  EXPECT_DOUBLE_EQ(make_trajectory(c).v().value(2.0, 3.0), 9.0);
  c.loading.profile = ProfileKind::RampHold;
  c.loading.t_ramp = 0.5;
  EXPECT_DOUBLE_EQ(make_trajectory(c).s(0.75), 1.0);
  c.loading.reparam = Reparam::Square;
  EXPECT_DOUBLE_EQ(make_trajectory(c).s(0.5), 0.5);
}

TEST(Builders, PartitionAndModels) {
  RunConfig c;
  c.time.steps = 4;
  EXPECT_EQ(make_partition(c).knots(), (std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0}));
  c.time.knots = {0.0, 0.4, 1.0};
  EXPECT_EQ(make_partition(c).steps(), 2);
  const Models m = make_models(c);
  EXPECT_EQ(m.d.sigma_y(), 0.1);
  EXPECT_EQ(m.d.mode(), DissipationDensity::Mode::Frobenius);
  c.material.h_mode = DissipationDensity::Mode::Gauge;
  EXPECT_EQ(make_dissipation(c).directions().size(), 5u);
  const Grid g = make_grid(c);
  EXPECT_EQ(g.nx(), 8);
  EXPECT_EQ(g.gamma_d(), kLeft | kRight);
}

TEST(SnapshotSelection, Forms) {
  EXPECT_EQ(detail::snapshot_selection("last", 5), std::vector<int>{5});
  EXPECT_EQ(detail::snapshot_selection("none", 5), std::vector<int>{});
  EXPECT_EQ(detail::snapshot_selection("all", 2), (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(detail::snapshot_selection("3, 1, 3", 5), (std::vector<int>{1, 3}));
}
