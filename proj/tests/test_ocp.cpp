#include "ztube/membership.hpp"
#include "ztube/ocp.hpp"

#include "lq_oracle.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <iostream>
#include <sstream>

using namespace ztube;
using namespace ztube::testing;

namespace {

struct DiProblem {
  PlantModel plant{di_A(), di_B(), di_noise()};
  MatrixZonotoped md;
  NominalModel nominal;
  TubeOperators ops;
  GainCertificate cert;
  OcpSpec spec;
};

DiProblem di_problem(std::uint64_t seed, Tightening mode = Tightening::coupled, const Zonotoped& noise = di_noise()) {
  DiProblem p;
  p.plant = PlantModel(di_A(), di_B(), noise);
  std::mt19937_64 rng(seed);
  auto d = collect_trajectory(p.plant, 100, di_x0(), {}, NoiseLaw::uniform, rng);
  p.md = build_consistent_set(d, noise);
  p.nominal = NominalModel::center_of(p.md);
  p.ops = TubeOperators::make(p.md, p.nominal, di_K(), noise);
  p.cert.K = di_K();
  p.spec.horizon = 2;
  p.spec.state_set = di_state_set();
  p.spec.input_set = di_input_set();
  p.spec.cost.Q = MatrixXd::Identity(2, 2);
  p.spec.cost.input_abs_weight = 1e-2;
  p.spec.tightening = mode;
  return p;
}

double rel_diff(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST(OcpSpec, Validation) {
  auto p = di_problem(1);
  EXPECT_NO_THROW(p.spec.validate(2, 1));
  auto bad = p.spec;
  bad.horizon = 0;
  EXPECT_THROW(bad.validate(2, 1), std::invalid_argument);
  bad = p.spec;
  bad.cost.Q(0, 0) = -1.0;
  EXPECT_THROW(bad.validate(2, 1), std::invalid_argument);
  bad = p.spec;
  bad.cost.input_abs_weight = -1.0;
  EXPECT_THROW(bad.validate(2, 1), std::invalid_argument);
  bad = p.spec;
  bad.input_set = di_state_set();
  EXPECT_THROW(bad.validate(2, 1), DimensionError);
  EXPECT_EQ(tightening_from_string("worst_case"), Tightening::worst_case);
  EXPECT_THROW(tightening_from_string("tight"), std::invalid_argument);
}

TEST(SolveOcp, MatchesBatchLeastSquares) {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    for (auto mode : {Tightening::coupled, Tightening::worst_case}) {
      std::mt19937_64 inst_rng(1000 + rep);
      auto inst = make_lq_instance(inst_rng, mode);
      auto ref = lq_reference(inst);
      for (const auto& x : ref.states) ASSERT_LT(x.lpNorm<Eigen::Infinity>(), 1e2);
      auto sol = solve_ocp(VectorXd::Zero(inst.A.rows()), inst.x1, inst.nominal, inst.ops, inst.spec);
      ASSERT_TRUE(sol.ok()) << rep;
      EXPECT_LT(rel_diff(sol.objective, ref.objective), 1e-6) << rep;
      for (Index k = 0; k < inst.N; ++k)
        EXPECT_LT((sol.nominal_states[static_cast<std::size_t>(k)] - ref.states[static_cast<std::size_t>(k)])
                      .lpNorm<Eigen::Infinity>(),
                  1e-6 * (1.0 + ref.states[static_cast<std::size_t>(k)].lpNorm<Eigen::Infinity>()));
      EXPECT_LE(sol.dynamics_residual(inst.nominal), 1e-6);
      for (const auto& b : sol.error_bounds) EXPECT_EQ(b.radius().lpNorm<Eigen::Infinity>(), 0.0);
    }
  }
}

TEST(SolveOcp, InfeasibleTighteningIsReported) {
  // Noise wider than Z_x in x2: the step-2 tube cannot fit.
  const Zonotoped wide = Zonotoped::box(VectorXd::Zero(2), (VectorXd(2) << 0.1, 2.5).finished());
  for (auto mode : {Tightening::coupled, Tightening::worst_case}) {
    auto p = di_problem(3, mode);
    p.ops = TubeOperators::make(p.md, p.nominal, di_K(), wide);
    auto sol = solve_ocp(VectorXd::Zero(2), (VectorXd(2) << -4, 0).finished(), p.nominal, p.ops, p.spec);
    EXPECT_EQ(sol.status, OcpStatus::infeasible);
    ASSERT_TRUE(sol.infeasible_step.has_value());
    EXPECT_EQ(*sol.infeasible_step, 2);
  }
  auto p = di_problem(3);
  auto outside = solve_ocp(VectorXd::Zero(2), (VectorXd(2) << 1, 0).finished(), p.nominal, p.ops, p.spec);
  EXPECT_EQ(outside.status, OcpStatus::infeasible);
  EXPECT_EQ(outside.infeasible_step, 1);
}

TEST(SolveOcp, PresetStepZero) {
  for (auto mode : {Tightening::coupled, Tightening::worst_case}) {
    auto p = di_problem(4, mode);
    auto sol = solve_ocp(VectorXd::Zero(2), di_x0(), p.nominal, p.ops, p.spec);
    ASSERT_TRUE(sol.ok()) << to_string(mode);
    ASSERT_EQ(sol.nominal_inputs.size(), 2u);
    ASSERT_EQ(sol.nominal_states.size(), 3u);
    ASSERT_EQ(sol.error_bounds.size(), 3u);
    EXPECT_EQ(sol.nominal_states[0], di_x0());
    EXPECT_EQ(sol.error_bounds[0].radius().norm(), 0.0);
    for (std::size_t k = 0; k < 2; ++k) {
      const auto hu = interval_hull(Zonotoped(di_K() * to_zonotope(sol.error_bounds[k])) + sol.nominal_inputs[k]);
      EXPECT_GE(hu.lower()(0), -1.0 - 1e-6);
      EXPECT_LE(hu.upper()(0), 1.0 + 1e-6);
      const IntervalBoxd hx(sol.nominal_states[k] + sol.error_bounds[k].lower(),
                            sol.nominal_states[k] + sol.error_bounds[k].upper());
      EXPECT_TRUE(interval_hull(di_state_set()).contains(hx.lower(), 1e-6));
      EXPECT_TRUE(interval_hull(di_state_set()).contains(hx.upper(), 1e-6));
    }
    EXPECT_LE(sol.dynamics_residual(p.nominal), 1e-6);
    // The reported objective is the stage cost sum on the returned pairs.
    double sum = 0.0;
    for (std::size_t k = 0; k < 2; ++k) sum += p.spec.cost(sol.nominal_states[k], sol.nominal_inputs[k]);
    EXPECT_NEAR(sol.objective, sum, 1e-8);
  }
}

TEST(SolveOcp, ObjectiveNotWorseThanFeasibleAlternative) {
  auto p = di_problem(5);
  auto sol = solve_ocp(VectorXd::Zero(2), di_x0(), p.nominal, p.ops, p.spec);
  ASSERT_TRUE(sol.ok());
  // Tighter input bounds shrink the feasible set, so the optimum can only rise.
  auto tight = p.spec;
  tight.input_set = Zonotoped(VectorXd::Zero(1), MatrixXd::Constant(1, 1, 0.9));
  auto sol2 = solve_ocp(VectorXd::Zero(2), di_x0(), p.nominal, p.ops, tight);
  ASSERT_TRUE(sol2.ok());
  EXPECT_GE(sol2.objective, sol.objective - 1e-7);
}

TEST(SolveOcp, ModeConsistency) {
  for (std::uint64_t seed = 6; seed < 9; ++seed) {
    auto pc = di_problem(seed, Tightening::coupled);
    auto pw = di_problem(seed, Tightening::worst_case);
    auto c = solve_ocp(VectorXd::Zero(2), di_x0(), pc.nominal, pc.ops, pc.spec);
    auto w = solve_ocp(VectorXd::Zero(2), di_x0(), pw.nominal, pw.ops, pw.spec);
    ASSERT_TRUE(c.ok());
    ASSERT_TRUE(w.ok());
    for (std::size_t k = 0; k < c.error_bounds.size(); ++k)
      EXPECT_TRUE((c.error_bounds[k].radius().array() <= w.error_bounds[k].radius().array() + 1e-12).all()) << k;
    // Less tightening leaves a larger feasible set.
    EXPECT_LE(c.objective, w.objective + 1e-7);
  }
}

TEST(SolveOcp, TighteningMonotoneInNoise) {
  const MatrixXd g = di_noise().generators();
  for (double alpha : {1.0, 1.5, 2.0}) {
    auto base = di_problem(10, Tightening::worst_case);
    auto big = base;
    big.ops = TubeOperators::make(base.md, base.nominal, di_K(), Zonotoped(VectorXd::Zero(2), alpha * 1.1 * g));
    base.ops = TubeOperators::make(base.md, base.nominal, di_K(), Zonotoped(VectorXd::Zero(2), alpha * g));
    auto a = worst_case_tube_sequence(base.ops, di_state_set(), di_input_set(), 6, TubeConfig::boxed());
    auto b = worst_case_tube_sequence(big.ops, di_state_set(), di_input_set(), 6, TubeConfig::boxed());
    for (std::size_t k = 0; k < a.size(); ++k)
      EXPECT_TRUE((interval_radius(a[k]).array() <= interval_radius(b[k]).array() + 1e-15).all());
    auto sa = solve_ocp(VectorXd::Zero(2), di_x0(), base.nominal, base.ops, base.spec);
    auto sb = solve_ocp(VectorXd::Zero(2), di_x0(), big.nominal, big.ops, big.spec);
    if (sa.ok() && sb.ok())
      for (std::size_t k = 0; k < sa.error_bounds.size(); ++k)
        EXPECT_TRUE((sa.error_bounds[k].radius().array() <= sb.error_bounds[k].radius().array() + 1e-15).all());
  }
}

TEST(RecedingHorizon, ZeroSteps) {
  auto p = di_problem(11);
  std::mt19937_64 rng(1);
  auto traj = run_receding_horizon(p.plant, p.nominal, p.ops, p.cert, p.spec, 0, di_x0(), NoiseLaw::vertices, rng);
  EXPECT_TRUE(traj.complete());
  EXPECT_TRUE(traj.steps.empty());
  ASSERT_TRUE(traj.terminal.has_value());
  EXPECT_EQ(traj.terminal->x, di_x0());
  EXPECT_EQ(traj.states().size(), 1u);
}

TEST(RecedingHorizon, RejectsForeignGain) {
  auto p = di_problem(11);
  std::mt19937_64 rng(1);
  p.cert.K(0, 0) += 0.1;
  EXPECT_THROW(run_receding_horizon(p.plant, p.nominal, p.ops, p.cert, p.spec, 3, di_x0(), NoiseLaw::vertices, rng),
               std::invalid_argument);
}

TEST(RecedingHorizon, NoiseFreeExactModelReplays) {
  MatrixXd ab(2, 3);
  ab << di_A(), di_B();
  MatrixZonotoped md(ab);
  PlantModel plant(di_A(), di_B(), Zonotoped::origin(2));
  auto nominal = NominalModel::center_of(md);
  auto ops = TubeOperators::make(md, nominal, di_K(), Zonotoped::origin(2));
  GainCertificate cert;
  cert.K = di_K();
  auto spec = di_problem(12).spec;
  std::mt19937_64 rng(3);
  auto traj = run_receding_horizon(plant, nominal, ops, cert, spec, 12, di_x0(), NoiseLaw::none, rng);
  ASSERT_TRUE(traj.complete()) << traj.message;
  ASSERT_EQ(traj.steps.size(), 12u);
  VectorXd x = di_x0();
  for (const auto& s : traj.steps) {
    EXPECT_EQ(s.e, VectorXd::Zero(2));
    EXPECT_EQ(s.u, s.u_bar);
    EXPECT_LT((s.x - x).lpNorm<Eigen::Infinity>(), 1e-12);
    x = plant.step(x, s.u_bar, VectorXd::Zero(2));
  }
  EXPECT_LT((traj.terminal->x - x).lpNorm<Eigen::Infinity>(), 1e-12);

  auto rep = check_recursive_feasibility(traj, di_state_set(), di_input_set());
  EXPECT_TRUE(rep.passed);
  double margin = std::numeric_limits<double>::infinity();
  const auto hx = interval_hull(di_state_set());
  for (const auto& s : traj.states())
    margin = std::min({margin, (hx.upper() - s).minCoeff(), (s - hx.lower()).minCoeff()});
  EXPECT_EQ(rep.state_margin, margin);
}

TEST(RecedingHorizon, VertexNoiseKeepsConstraints) {
  for (auto mode : {Tightening::coupled, Tightening::worst_case}) {
    int feasible = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      auto p = di_problem(100 + seed, mode);
      std::mt19937_64 rng(200 + seed);
      auto traj =
          run_receding_horizon(p.plant, p.nominal, p.ops, p.cert, p.spec, 12, di_x0(), NoiseLaw::vertices, rng);
      if (!traj.complete()) continue;
      ++feasible;
      auto rep = check_recursive_feasibility(traj, di_state_set(), di_input_set());
      EXPECT_TRUE(rep.passed) << seed;
      EXPECT_LT(traj.terminal->x.norm(), di_x0().norm());
      for (const auto& s : traj.steps) {
        EXPECT_EQ(s.e, s.x - s.x_bar);
        EXPECT_TRUE(s.tube.contains(s.x, 1e-9)) << seed << " " << s.t;
      }
      EXPECT_TRUE(traj.terminal->tube.contains(traj.terminal->x, 1e-9));
    }
    if (mode == Tightening::coupled) EXPECT_GE(feasible, 9);
    std::cout << to_string(mode) << ": " << feasible << "/10 complete\n";
  }
}

TEST(FeasibilityCheck, FlagsViolatingStep) {
  TubeTrajectory traj;
  for (Index t = 0; t < 4; ++t) {
    TrajectoryStep s;
    s.t = t;
    s.x = (VectorXd(2) << -4, t == 2 ? 2.5 : 0.0).finished();
    s.x_bar = s.x;
    s.e = VectorXd::Zero(2);
    s.u = VectorXd::Zero(1);
    s.u_bar = s.u;
    s.tube = IntervalBoxd(s.x, s.x);
    traj.steps.push_back(s);
  }
  auto rep = check_recursive_feasibility(traj, di_state_set(), di_input_set());
  EXPECT_FALSE(rep.passed);
  EXPECT_EQ(rep.first_violation, 2);
  EXPECT_EQ(rep.state_violations, 1);
  EXPECT_NEAR(rep.state_margin, -0.5, 1e-15);
}

TEST(TrajectoryIo, CsvColumnsAndJson) {
  auto p = di_problem(13);
  std::mt19937_64 rng(5);
  auto traj = run_receding_horizon(p.plant, p.nominal, p.ops, p.cert, p.spec, 3, di_x0(), NoiseLaw::vertices, rng);
  ASSERT_TRUE(traj.complete());
  std::stringstream ss;
  write_trajectory_csv(ss, traj);
  std::string line;
  std::getline(ss, line);
  EXPECT_EQ(line, "t,x1,x2,xbar1,xbar2,u,tube_lo1,tube_hi1,tube_lo2,tube_hi2,cost");
  int rows = 0;
  std::string last;
  while (std::getline(ss, line)) {
    EXPECT_EQ(split_csv_line(line).size(), 11u);
    last = line;
    ++rows;
  }
  EXPECT_EQ(rows, 4);
  Json j = traj;
  EXPECT_EQ(j["status"], "ok");
  EXPECT_EQ(j["steps"].size(), 3u);
  EXPECT_TRUE(j["terminal"].is_object());
  const auto fields = split_csv_line(last);
  EXPECT_EQ(parse_number(fields[1]), traj.terminal->x(0));
  EXPECT_TRUE(fields[5].empty());
}

TEST(ConstraintCount, IndependentOfHorizon) {
  EXPECT_EQ(constraints_per_step(2, 1, false), 6);
  EXPECT_EQ(constraints_per_step(2, 1, true), 8);
}
