#include "ztube/ocp.hpp"

#include "ztube/membership.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <tuple>

namespace ztube {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kConstraintTolerance = 1e-6;

/// Linear rows accumulated densely; `step` 0 marks rows that belong to no stage.
class RowSet {
 public:
  explicit RowSet(Index cols) : cols_(cols) {}

  Eigen::Ref<Eigen::RowVectorXd> add(double rhs, Index step = 0) {
    rows_.push_back(Eigen::RowVectorXd::Zero(cols_));
    rhs_.push_back(rhs);
    steps_.push_back(step);
    return rows_.back();
  }

  Index size() const { return static_cast<Index>(rows_.size()); }

  std::pair<MatrixXd, VectorXd> assemble(Index max_step = std::numeric_limits<Index>::max()) const {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < rows_.size(); ++i)
      if (steps_[i] <= max_step) keep.push_back(i);
    MatrixXd a(static_cast<Index>(keep.size()), cols_);
    VectorXd b(static_cast<Index>(keep.size()));
    for (std::size_t r = 0; r < keep.size(); ++r) {
      a.row(static_cast<Index>(r)) = rows_[keep[r]];
      b(static_cast<Index>(r)) = rhs_[keep[r]];
    }
    return {std::move(a), std::move(b)};
  }

 private:
  Index cols_;
  std::deque<Eigen::RowVectorXd> rows_;
  std::vector<double> rhs_;
  std::vector<Index> steps_;
};

/// Column offsets of the decision vector. Blocks are indexed by step k = 1..
struct Layout {
  Index n, m, N, gd, gdelta;
  bool abs_cost, coupled;
  Index u0, x0, s0, c0, r0, a0, b0, total;

  Layout(Index n_, Index m_, Index N_, Index gd_, Index gdelta_, bool abs_cost_, bool coupled_)
      : n(n_), m(m_), N(N_), gd(gd_), gdelta(gdelta_), abs_cost(abs_cost_), coupled(coupled_) {
    u0 = 0;
    x0 = u0 + N * m;
    s0 = x0 + (N + 1) * n;
    c0 = s0 + (abs_cost ? N * m : 0);
    r0 = c0 + (coupled ? N * n : 0);
    a0 = r0 + (coupled ? N * n : 0);
    b0 = a0 + (coupled ? (N - 1) * gd * n : 0);
    total = b0 + (coupled ? (N - 1) * gdelta * n : 0);
  }
  Index u(Index k) const { return u0 + (k - 1) * m; }
  Index x(Index k) const { return x0 + (k - 1) * n; }
  Index s(Index k) const { return s0 + (k - 1) * m; }
  Index c(Index k) const { return c0 + (k - 1) * n; }
  Index r(Index k) const { return r0 + (k - 1) * n; }
  Index a(Index k, Index i) const { return a0 + ((k - 1) * gd + i) * n; }
  Index b(Index k, Index i) const { return b0 + ((k - 1) * gdelta + i) * n; }
};

struct Program {
  QuadraticProgram qp;
  RowSet ineq;
  Layout lay;
};

double box_margin(const IntervalBoxd& box, const VectorXd& p) {
  return std::min((box.upper() - p).minCoeff(), (p - box.lower()).minCoeff());
}

Program build_program(const VectorXd& e_t, const VectorXd& x_bar_t, const NominalModel& nominal,
                      const TubeOperators& ops, const OcpSpec& spec, const std::vector<Zonotoped>* fixed_tube) {
  const Index n = ops.state_dim(), m = ops.input_dim(), N = spec.horizon;
  const bool coupled = fixed_tube == nullptr;
  const bool abs_cost = spec.cost.input_abs_weight > 0.0;
  Layout lay(n, m, N, ops.m_dk.num_generators(), ops.m_delta.num_generators(), abs_cost, coupled);
  Program p{{}, RowSet(lay.total), lay};
  RowSet eq(lay.total);
  auto& in = p.ineq;

  const IntervalBoxd hx = interval_hull(spec.state_set), hu = interval_hull(spec.input_set);
  const MatrixXd& K = ops.K;
  const MatrixXd abs_k = K.cwiseAbs();

  // Nominal dynamics.
  for (Index i = 0; i < n; ++i) eq.add(x_bar_t(i))(lay.x(1) + i) = 1.0;
  for (Index k = 1; k <= N; ++k)
    for (Index i = 0; i < n; ++i) {
      auto row = eq.add(0.0);
      row(lay.x(k + 1) + i) = 1.0;
      row.segment(lay.x(k), n) = -nominal.A_bar.row(i);
      row.segment(lay.u(k), m) = -nominal.B_bar.row(i);
    }

  if (abs_cost)
    for (Index k = 1; k <= N; ++k)
      for (Index i = 0; i < m; ++i) {
        auto hi = in.add(0.0);
        hi(lay.u(k) + i) = 1.0;
        hi(lay.s(k) + i) = -1.0;
        auto lo = in.add(0.0);
        lo(lay.u(k) + i) = -1.0;
        lo(lay.s(k) + i) = -1.0;
      }

  if (coupled) {
    const MatrixXd& cd = ops.m_dk.center();
    const MatrixXd& cdel = ops.m_delta.center();
    const VectorXd w_rad = interval_radius(ops.noise);
    MatrixXd abs_sum = cd.cwiseAbs();
    for (Index i = 0; i < lay.gd; ++i) abs_sum += ops.m_dk.generator(i).cwiseAbs();

    for (Index i = 0; i < n; ++i) {
      eq.add(e_t(i))(lay.c(1) + i) = 1.0;
      eq.add(0.0)(lay.r(1) + i) = 1.0;
    }
    for (Index k = 1; k < N; ++k) {
      // c_{k+1} = C_dk c_k + C_delta [xb_k; ub_k] + c_w
      for (Index i = 0; i < n; ++i) {
        auto row = eq.add(ops.noise.center()(i));
        row(lay.c(k + 1) + i) = 1.0;
        row.segment(lay.c(k), n) = -cd.row(i);
        row.segment(lay.x(k), n) = -cdel.row(i).head(n);
        row.segment(lay.u(k), m) = -cdel.row(i).tail(m);
      }
      // a_{k,i} >= |G_i c_k|, b_{k,i} >= |G_delta,i [xb_k; ub_k]|
      for (Index g = 0; g < lay.gd; ++g)
        for (Index i = 0; i < n; ++i)
          for (double sign : {1.0, -1.0}) {
            auto row = in.add(0.0);
            row.segment(lay.c(k), n) = sign * ops.m_dk.generator(g).row(i);
            row(lay.a(k, g) + i) = -1.0;
          }
      for (Index g = 0; g < lay.gdelta; ++g)
        for (Index i = 0; i < n; ++i)
          for (double sign : {1.0, -1.0}) {
            auto row = in.add(0.0);
            row.segment(lay.x(k), n) = sign * ops.m_delta.generator(g).row(i).head(n);
            row.segment(lay.u(k), m) = sign * ops.m_delta.generator(g).row(i).tail(m);
            row(lay.b(k, g) + i) = -1.0;
          }
      // rho_{k+1} >= (|C_dk| + sum |G_i|) rho_k + sum a + sum b + rad(Z_w)
      for (Index i = 0; i < n; ++i) {
        auto row = in.add(-w_rad(i));
        row(lay.r(k + 1) + i) = -1.0;
        row.segment(lay.r(k), n) = abs_sum.row(i);
        for (Index g = 0; g < lay.gd; ++g) row(lay.a(k, g) + i) = 1.0;
        for (Index g = 0; g < lay.gdelta; ++g) row(lay.b(k, g) + i) = 1.0;
      }
    }
    for (Index k = 1; k <= N; ++k) {
      for (Index i = 0; i < n && k > 1; ++i) {
        auto hi = in.add(hx.upper()(i), k);
        hi(lay.x(k) + i) = 1.0;
        hi(lay.c(k) + i) = 1.0;
        hi(lay.r(k) + i) = 1.0;
        auto lo = in.add(-hx.lower()(i), k);
        lo(lay.x(k) + i) = -1.0;
        lo(lay.c(k) + i) = -1.0;
        lo(lay.r(k) + i) = 1.0;
      }
      for (Index i = 0; i < m; ++i) {
        auto hi = in.add(hu.upper()(i), k);
        hi(lay.u(k) + i) = 1.0;
        hi.segment(lay.c(k), n) = K.row(i);
        hi.segment(lay.r(k), n) = abs_k.row(i);
        auto lo = in.add(-hu.lower()(i), k);
        lo(lay.u(k) + i) = -1.0;
        lo.segment(lay.c(k), n) = -K.row(i);
        lo.segment(lay.r(k), n) = abs_k.row(i);
      }
    }
  } else {
    for (Index k = 1; k <= N; ++k) {
      const auto& z = (*fixed_tube)[static_cast<std::size_t>(k - 1)];
      const IntervalBoxd he = interval_hull(z);
      const IntervalBoxd hke = interval_hull(Zonotoped(K * z));
      for (Index i = 0; i < n && k > 1; ++i) {
        in.add(hx.upper()(i) - he.upper()(i), k)(lay.x(k) + i) = 1.0;
        in.add(he.lower()(i) - hx.lower()(i), k)(lay.x(k) + i) = -1.0;
      }
      for (Index i = 0; i < m; ++i) {
        in.add(hu.upper()(i) - hke.upper()(i), k)(lay.u(k) + i) = 1.0;
        in.add(hke.lower()(i) - hu.lower()(i), k)(lay.u(k) + i) = -1.0;
      }
    }
  }

  auto& qp = p.qp;
  qp.hessian = MatrixXd::Zero(lay.total, lay.total);
  qp.linear = VectorXd::Zero(lay.total);
  const auto& c = spec.cost;
  for (Index k = 1; k <= N; ++k) {
    qp.hessian.block(lay.x(k), lay.x(k), n, n) = 2.0 * c.Q;
    if (c.state_linear.size() > 0) qp.linear.segment(lay.x(k), n) = c.state_linear;
    if (c.input_linear.size() > 0) qp.linear.segment(lay.u(k), m) = c.input_linear;
    if (abs_cost) qp.linear.segment(lay.s(k), m).setConstant(c.input_abs_weight);
  }
  std::tie(qp.eq_matrix, qp.eq_rhs) = eq.assemble();
  std::tie(qp.ineq_matrix, qp.ineq_rhs) = in.assemble();
  return p;
}

std::optional<Index> first_infeasible_step(Program p, const QpSettings& settings) {
  for (Index k = 1; k <= p.lay.N; ++k) {
    std::tie(p.qp.ineq_matrix, p.qp.ineq_rhs) = p.ineq.assemble(k);
    const double v = feasibility_violation(p.qp, settings);
    if (v < 0.0 || v > settings.infeasibility_tolerance) return k;
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_string(Tightening t) { return t == Tightening::coupled ? "coupled" : "worst_case"; }

Tightening tightening_from_string(std::string_view s) {
  if (s == "coupled") return Tightening::coupled;
  if (s == "worst_case") return Tightening::worst_case;
  throw std::invalid_argument("unknown tightening mode '" + std::string(s) + "'");
}

std::string_view to_string(OcpStatus s) {
  switch (s) {
    case OcpStatus::optimal: return "optimal";
    case OcpStatus::infeasible: return "infeasible";
    case OcpStatus::solver_failure: return "solver_failure";
  }
  return "unknown";
}

std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::ok: return "ok";
    case RunStatus::infeasible: return "infeasible";
    case RunStatus::solver_failure: return "solver_failure";
    case RunStatus::input_out_of_bounds: return "input_out_of_bounds";
  }
  return "unknown";
}

double StageCost::operator()(const VectorXd& x, const VectorXd& u) const {
  double v = x.dot(Q * x) + input_abs_weight * u.lpNorm<1>();
  if (state_linear.size() > 0) v += state_linear.dot(x);
  if (input_linear.size() > 0) v += input_linear.dot(u);
  return v;
}

void OcpSpec::validate(Index n, Index m) const {
  if (horizon < 1) throw std::invalid_argument("ocp: horizon must be at least 1");
  detail::require(state_set.dim() == n, "ocp: state_set dimension must equal n");
  detail::require(input_set.dim() == m, "ocp: input_set dimension must equal m");
  detail::require(cost.Q.rows() == n && cost.Q.cols() == n, "ocp: Q must be n x n");
  detail::require(cost.state_linear.size() == 0 || cost.state_linear.size() == n, "ocp: state_linear must have n entries");
  detail::require(cost.input_linear.size() == 0 || cost.input_linear.size() == m, "ocp: input_linear must have m entries");
  if (!(cost.input_abs_weight >= 0.0)) throw std::invalid_argument("ocp: input_abs_weight must be nonnegative");
  if ((cost.Q - cost.Q.transpose()).lpNorm<Eigen::Infinity>() > 1e-12 * (1.0 + cost.Q.lpNorm<Eigen::Infinity>()))
    throw std::invalid_argument("ocp: Q must be symmetric");
  const Eigen::SelfAdjointEigenSolver<MatrixXd> es(cost.Q, Eigen::EigenvaluesOnly);
  if (n > 0 && es.eigenvalues().minCoeff() < -1e-12 * (1.0 + cost.Q.lpNorm<Eigen::Infinity>()))
    throw std::invalid_argument("ocp: Q must be positive semidefinite");
}

double OcpSolution::dynamics_residual(const NominalModel& nominal) const {
  double r = 0.0;
  for (std::size_t k = 0; k < nominal_inputs.size(); ++k)
    r = std::max(r, (nominal_states[k + 1] - nominal.step(nominal_states[k], nominal_inputs[k])).lpNorm<Eigen::Infinity>());
  return r;
}

Index constraints_per_step(Index n, Index m, bool abs_input_cost) { return 2 * n + 2 * m + (abs_input_cost ? 2 * m : 0); }

OcpSolution solve_ocp(const VectorXd& e_t, const VectorXd& x_bar_t, const NominalModel& nominal,
                      const TubeOperators& ops, const OcpSpec& spec) {
  const Index n = ops.state_dim(), m = ops.input_dim(), N = spec.horizon;
  spec.validate(n, m);
  detail::require(e_t.size() == n && x_bar_t.size() == n, "solve_ocp: e_t and x_bar_t must have n entries");
  detail::require(nominal.A_bar.rows() == n && nominal.B_bar.cols() == m, "solve_ocp: nominal model shape");

  OcpSolution sol;
  // At k = 1 the state and its tube are both fixed; those rows are checked here, not handed to the solver.
  if (!interval_hull(spec.state_set).contains(x_bar_t + e_t, 1e-9)) {
    sol.status = OcpStatus::infeasible;
    sol.infeasible_step = 1;
    return sol;
  }
  std::vector<Zonotoped> fixed;
  if (spec.tightening == Tightening::worst_case) {
    try {
      fixed = worst_case_tube_sequence(ops, spec.state_set, spec.input_set, N, TubeConfig::boxed(), Zonotoped(e_t));
    } catch (const TubeDivergent& e) {
      sol.status = OcpStatus::infeasible;
      sol.infeasible_step = std::min<Index>(e.step() + 1, N);
      return sol;
    }
  }
  Program prog = build_program(e_t, x_bar_t, nominal, ops, spec, fixed.empty() ? nullptr : &fixed);
  const QpSolution qs = solve_qp(prog.qp, spec.solver);
  sol.iterations = qs.iterations;
  if (qs.status == SolveStatus::infeasible) {
    sol.status = OcpStatus::infeasible;
    sol.infeasible_step = first_infeasible_step(prog, spec.solver).value_or(N);
    return sol;
  }
  if (qs.status != SolveStatus::optimal) {
    sol.status = OcpStatus::solver_failure;
    return sol;
  }

  const Layout& lay = prog.lay;
  for (Index k = 1; k <= N; ++k) sol.nominal_inputs.push_back(qs.x.segment(lay.u(k), m));
  // Rolled out from the inputs so the nominal dynamics hold exactly, not to solver tolerance.
  sol.nominal_states.push_back(x_bar_t);
  for (Index k = 0; k < N; ++k)
    sol.nominal_states.push_back(nominal.step(sol.nominal_states.back(), sol.nominal_inputs[static_cast<std::size_t>(k)]));

  // The reported tube is recomputed from the solution rather than read off the epigraph variables.
  if (spec.tightening == Tightening::coupled) {
    std::vector<NominalPair> pairs;
    for (Index k = 0; k < N; ++k)
      pairs.emplace_back(sol.nominal_states[static_cast<std::size_t>(k)], sol.nominal_inputs[static_cast<std::size_t>(k)]);
    fixed = propagate_along(ops, Zonotoped(e_t), pairs, TubeConfig::boxed());
  }
  const IntervalBoxd hx = interval_hull(spec.state_set), hu = interval_hull(spec.input_set);
  double worst = std::numeric_limits<double>::infinity();
  for (Index k = 0; k <= N; ++k) {
    const auto& z = fixed[static_cast<std::size_t>(k)];
    sol.error_bounds.push_back(interval_hull(z));
    if (k == N) break;
    const auto& xs = sol.nominal_states[static_cast<std::size_t>(k)];
    const auto& us = sol.nominal_inputs[static_cast<std::size_t>(k)];
    const IntervalBoxd ex = interval_hull(z + xs);
    const IntervalBoxd eu = interval_hull(Zonotoped(ops.K * z) + us);
    worst = std::min({worst, (hx.upper() - ex.upper()).minCoeff(), (ex.lower() - hx.lower()).minCoeff(),
                      (hu.upper() - eu.upper()).minCoeff(), (eu.lower() - hu.lower()).minCoeff()});
  }
  if (worst < -kConstraintTolerance || sol.dynamics_residual(nominal) > kConstraintTolerance) {
    sol.status = OcpStatus::solver_failure;
    return sol;
  }
  sol.objective = 0.0;
  for (Index k = 0; k < N; ++k)
    sol.objective += spec.cost(sol.nominal_states[static_cast<std::size_t>(k)], sol.nominal_inputs[static_cast<std::size_t>(k)]);
  sol.status = OcpStatus::optimal;
  return sol;
}

std::vector<VectorXd> TubeTrajectory::states() const {
  std::vector<VectorXd> xs;
  for (const auto& s : steps) xs.push_back(s.x);
  if (terminal) xs.push_back(terminal->x);
  return xs;
}

TubeTrajectory run_receding_horizon(const PlantModel& plant, const NominalModel& nominal, const TubeOperators& ops,
                                    const GainCertificate& cert, const OcpSpec& spec, Index steps, const VectorXd& x0,
                                    NoiseLaw noise_law, std::mt19937_64& rng) {
  const Index n = ops.state_dim();
  detail::require(steps >= 0, "run_receding_horizon: steps must be nonnegative");
  detail::require(x0.size() == n && plant.state_dim() == n && plant.input_dim() == ops.input_dim(),
                  "run_receding_horizon: plant and operator dimensions");
  if (cert.K.rows() != ops.K.rows() || cert.K.cols() != ops.K.cols() || cert.K != ops.K)
    throw std::invalid_argument("run_receding_horizon: certificate gain differs from the tube operators' K");
  spec.validate(n, ops.input_dim());

  const NoiseSampler noise(plant.noise, noise_law);
  const IntervalBoxd hu = interval_hull(spec.input_set);
  TubeTrajectory traj;
  VectorXd x = x0, xb = x0, e = VectorXd::Zero(n);
  IntervalBoxd tube(x0, x0);
  for (Index t = 0; t < steps; ++t) {
    const OcpSolution sol = solve_ocp(e, xb, nominal, ops, spec);
    if (!sol.ok()) {
      traj.status = sol.status == OcpStatus::infeasible ? RunStatus::infeasible : RunStatus::solver_failure;
      traj.failed_step = t;
      traj.infeasible_horizon_step = sol.infeasible_step;
      traj.message = "P_N " + std::string(to_string(sol.status)) + " at t = " + std::to_string(t);
      break;
    }
    TrajectoryStep s;
    s.t = t;
    s.x = x;
    s.x_bar = xb;
    s.e = x - xb;
    s.u_bar = sol.nominal_inputs.front();
    s.u = ops.K * e + s.u_bar;
    s.tube = tube;
    s.cost = spec.cost(s.x, s.u);
    s.objective = sol.objective;
    traj.steps.push_back(s);
    if (!hu.contains(s.u, kConstraintTolerance)) {
      traj.status = RunStatus::input_out_of_bounds;
      traj.failed_step = t;
      traj.message = "applied input leaves hull(Z_u) at t = " + std::to_string(t);
      break;
    }
    x = plant.step(x, s.u, noise(rng));
    xb = sol.nominal_states[1];
    e = x - xb;
    tube = IntervalBoxd(xb + sol.error_bounds[1].lower(), xb + sol.error_bounds[1].upper());
  }
  if (traj.status == RunStatus::input_out_of_bounds) return traj;
  TrajectoryStep last;
  last.t = static_cast<Index>(traj.steps.size());
  last.x = x;
  last.x_bar = xb;
  last.e = x - xb;
  last.tube = tube;
  traj.terminal = last;
  return traj;
}

FeasibilityReport check_recursive_feasibility(const TubeTrajectory& traj, const Zonotoped& state_set,
                                              const Zonotoped& input_set) {
  FeasibilityReport rep;
  rep.all_steps_solved = traj.complete();
  rep.state_margin = rep.input_margin = std::numeric_limits<double>::infinity();
  const IntervalBoxd hx = interval_hull(state_set), hu = interval_hull(input_set);
  auto flag = [&](Index t) {
    if (!rep.first_violation || t < *rep.first_violation) rep.first_violation = t;
  };
  auto check_state = [&](Index t, const VectorXd& x) {
    const double mg = box_margin(hx, x);
    rep.state_margin = std::min(rep.state_margin, mg);
    if (mg < -1e-9 || !contains_point(state_set, x)) {
      ++rep.state_violations;
      flag(t);
    }
  };
  for (const auto& s : traj.steps) {
    check_state(s.t, s.x);
    const double mg = box_margin(hu, s.u);
    rep.input_margin = std::min(rep.input_margin, mg);
    if (mg < -1e-9 || !contains_point(input_set, s.u)) {
      ++rep.input_violations;
      flag(s.t);
    }
  }
  if (traj.terminal) check_state(traj.terminal->t, traj.terminal->x);
  rep.passed = rep.all_steps_solved && rep.state_violations == 0 && rep.input_violations == 0;
  return rep;
}

void write_trajectory_csv(std::ostream& out, const TubeTrajectory& traj) {
  const TrajectoryStep* first = !traj.steps.empty() ? &traj.steps.front() : (traj.terminal ? &*traj.terminal : nullptr);
  const Index n = first ? first->x.size() : 0;
  const Index m = !traj.steps.empty() ? traj.steps.front().u.size() : 1;
  out << 't';
  for (Index i = 0; i < n; ++i) out << ",x" << i + 1;
  for (Index i = 0; i < n; ++i) out << ",xbar" << i + 1;
  if (m == 1) {
    out << ",u";
  } else {
    for (Index i = 0; i < m; ++i) out << ",u" << i + 1;
  }
  for (Index i = 0; i < n; ++i) out << ",tube_lo" << i + 1 << ",tube_hi" << i + 1;
  out << ",cost\n";
  auto row = [&](const TrajectoryStep& s, bool terminal) {
    out << s.t;
    for (Index i = 0; i < n; ++i) out << ',' << format_number(s.x(i));
    for (Index i = 0; i < n; ++i) out << ',' << format_number(s.x_bar(i));
    for (Index i = 0; i < m; ++i) out << ',' << (terminal ? std::string() : format_number(s.u(i)));
    for (Index i = 0; i < n; ++i) out << ',' << format_number(s.tube.lower()(i)) << ',' << format_number(s.tube.upper()(i));
    out << ',' << (terminal ? std::string() : format_number(s.cost)) << '\n';
  };
  for (const auto& s : traj.steps) row(s, false);
  if (traj.terminal) row(*traj.terminal, true);
}

namespace {

Json vectors_to_json(const std::vector<VectorXd>& vs) {
  Json j = Json::array();
  for (const auto& v : vs) j.push_back(vector_to_json(v));
  return j;
}

Json step_to_json(const TrajectoryStep& s, bool terminal) {
  Json j{{"t", s.t}, {"x", vector_to_json(s.x)}, {"x_bar", vector_to_json(s.x_bar)}, {"e", vector_to_json(s.e)},
         {"tube", s.tube}};
  if (!terminal) {
    j["u"] = vector_to_json(s.u);
    j["u_bar"] = vector_to_json(s.u_bar);
    j["cost"] = s.cost;
    j["objective"] = s.objective;
  }
  return j;
}

}  // namespace

void to_json(Json& j, const OcpSolution& s) {
  j = Json{{"status", to_string(s.status)},
           {"nominal_inputs", vectors_to_json(s.nominal_inputs)},
           {"nominal_states", vectors_to_json(s.nominal_states)},
           {"error_bounds", s.error_bounds},
           {"objective", s.objective},
           {"iterations", s.iterations}};
  j["infeasible_step"] = s.infeasible_step ? Json(*s.infeasible_step) : Json(nullptr);
}

void to_json(Json& j, const TubeTrajectory& t) {
  Json steps = Json::array();
  for (const auto& s : t.steps) steps.push_back(step_to_json(s, false));
  j = Json{{"status", to_string(t.status)}, {"message", t.message}, {"steps", steps}};
  j["failed_step"] = t.failed_step ? Json(*t.failed_step) : Json(nullptr);
  j["infeasible_horizon_step"] = t.infeasible_horizon_step ? Json(*t.infeasible_horizon_step) : Json(nullptr);
  j["terminal"] = t.terminal ? step_to_json(*t.terminal, true) : Json(nullptr);
}

void to_json(Json& j, const FeasibilityReport& r) {
  j = Json{{"passed", r.passed},
           {"all_steps_solved", r.all_steps_solved},
           {"state_margin", r.state_margin},
           {"input_margin", r.input_margin},
           {"state_violations", r.state_violations},
           {"input_violations", r.input_violations}};
  j["first_violation"] = r.first_violation ? Json(*r.first_violation) : Json(nullptr);
}

}  // namespace ztube
