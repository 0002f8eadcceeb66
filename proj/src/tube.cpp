#include "ztube/tube.hpp"

#include "ztube/membership.hpp"
#include "ztube/serialize.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <string>

namespace ztube {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd stack_ab(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd ab(a.rows(), a.cols() + b.cols());
  ab << a, b;
  return ab;
}

VectorXd stack_pair(const VectorXd& x, const VectorXd& u) {
  VectorXd p(x.size() + u.size());
  p << x, u;
  return p;
}

MatrixXd identity_over_gain(const MatrixXd& K) {
  const Index n = K.cols();
  MatrixXd r(n + K.rows(), n);
  r << MatrixXd::Identity(n, n), K;
  return r;
}

double hull_radius(const Zonotoped& z) {
  const VectorXd r = interval_radius(z);
  return r.size() == 0 ? 0.0 : r.maxCoeff();
}

}  // namespace

NominalModel NominalModel::center_of(const MatrixZonotoped& md) {
  const Index n = md.rows();
  detail::require(md.cols() > n, "nominal model: M_D must have n + m columns");
  return {md.center().leftCols(n), md.center().rightCols(md.cols() - n), true};
}

NominalModel NominalModel::checked(MatrixXd a, MatrixXd b, const MatrixZonotoped& md, bool require_member) {
  detail::require(a.rows() == md.rows() && a.cols() == md.rows(), "nominal model: A_bar must be n x n");
  detail::require(b.rows() == md.rows() && a.cols() + b.cols() == md.cols(), "nominal model: B_bar must be n x m");
  const bool member = mz_contains(md, stack_ab(a, b));
  if (require_member && !member) throw std::invalid_argument("nominal model: [A_bar B_bar] is not a member of M_D");
  return {std::move(a), std::move(b), member};
}

TubeOperators TubeOperators::make(const MatrixZonotoped& md, const NominalModel& nominal, const MatrixXd& K,
                                  const Zonotoped& noise) {
  const Index n = md.rows();
  detail::require(K.cols() == n && K.rows() + n == md.cols(), "tube operators: K must be m x n");
  detail::require(noise.dim() == n, "tube operators: noise dimension must equal n");
  detail::require(nominal.A_bar.rows() == n && nominal.B_bar.cols() == K.rows(),
                  "tube operators: nominal model shape");
  return {mz_linear_map_right(md, identity_over_gain(K)), mz_shift(md, stack_ab(nominal.A_bar, nominal.B_bar)), noise,
          K};
}

bool TubeOperators::consistent_with(const MatrixZonotoped& md, const NominalModel& nominal) const {
  const auto fresh = make(md, nominal, K, noise);
  auto same = [](const MatrixZonotoped& a, const MatrixZonotoped& b) {
    if (a.center() != b.center() || a.num_generators() != b.num_generators()) return false;
    for (Index i = 0; i < a.num_generators(); ++i)
      if (a.generator(i) != b.generator(i)) return false;
    return true;
  };
  return same(fresh.m_dk, m_dk) && same(fresh.m_delta, m_delta);
}

Zonotoped reduce_tube(const Zonotoped& z, const TubeConfig& config) {
  if (!config.reduce_every_step && z.num_generators() <= config.cap_for(z.dim())) return z;
  if (config.method == Reduction::box) return reduce_order_box(z);
  return reduce_order(z, config.cap_for(z.dim()));
}

Zonotoped exact_error_zonotope(const PlantModel& plant, const NominalModel& nominal, const MatrixXd& K,
                               const VectorXd& e0, const std::vector<NominalPair>& nominal_traj, Index t) {
  detail::require(t >= 0 && t <= static_cast<Index>(nominal_traj.size()), "exact_error_zonotope: t out of range");
  const MatrixXd acl = plant.A0 + plant.B0 * K;
  const MatrixXd da = plant.A0 - nominal.A_bar;
  const MatrixXd db = plant.B0 - nominal.B_bar;
  Zonotoped z(e0);
  for (Index s = 0; s < t; ++s) {
    const auto& [xb, ub] = nominal_traj[static_cast<std::size_t>(s)];
    z = (acl * z + plant.noise) + VectorXd(da * xb + db * ub);
  }
  return z;
}

Zonotoped propagate_error_tube(const TubeOperators& ops, const Zonotoped& z_prev, const VectorXd& x_bar,
                               const VectorXd& u_bar, const TubeConfig& config) {
  const Zonotoped p(stack_pair(x_bar, u_bar));
  return reduce_tube(ops.m_dk * z_prev + ops.m_delta * p + ops.noise, config);
}

std::vector<Zonotoped> propagate_along(const TubeOperators& ops, const Zonotoped& initial,
                                       const std::vector<NominalPair>& pairs, const TubeConfig& config) {
  std::vector<Zonotoped> tube{initial};
  for (const auto& [xb, ub] : pairs) tube.push_back(propagate_error_tube(ops, tube.back(), xb, ub, config));
  return tube;
}

Zonotoped worst_case_disturbance(const TubeOperators& ops, const Zonotoped& state_set, const Zonotoped& input_set) {
  return ops.m_delta * cartesian_product(state_set, input_set) + ops.noise;
}

std::vector<Zonotoped> worst_case_tube_sequence(const TubeOperators& ops, const Zonotoped& state_set,
                                                const Zonotoped& input_set, Index horizon, const TubeConfig& config,
                                                const std::optional<Zonotoped>& initial) {
  const Index n = ops.state_dim();
  detail::require(state_set.dim() == n && input_set.dim() == ops.input_dim(),
                  "worst_case_tube_sequence: constraint set dimensions");
  const Zonotoped v = worst_case_disturbance(ops, state_set, input_set);
  const double limit = config.divergence_factor * std::max(hull_radius(state_set), 1e-300);
  std::vector<Zonotoped> tube{initial ? *initial : Zonotoped::origin(n)};
  tube.reserve(static_cast<std::size_t>(horizon + 1));
  for (Index k = 1; k <= horizon; ++k) {
    Zonotoped next = reduce_tube(ops.m_dk * tube.back() + v, config);
    if (config.monotone_hull) {
      const VectorXd deficit = (interval_radius(tube.back()) - interval_radius(next)).cwiseMax(0.0);
      if (deficit.maxCoeff() > 0.0) next = next + Zonotoped(VectorXd::Zero(n), MatrixXd(deficit.asDiagonal()));
    }
    const double r = hull_radius(next);
    if (!std::isfinite(r) || r > limit)
      throw TubeDivergent(k, r, "tube divergent at step " + std::to_string(k) + ": hull radius " + std::to_string(r));
    tube.push_back(std::move(next));
  }
  return tube;
}

Zonotoped truncated_tube(const TubeOperators& ops, const std::vector<NominalPair>& window, Index k0,
                         const TubeConfig& config) {
  detail::require(k0 >= 1 && static_cast<Index>(window.size()) == k0, "truncated_tube: window length must equal k0");
  Zonotoped sum = Zonotoped::origin(ops.state_dim());
  for (Index k = 0; k < k0; ++k) {
    const auto& [xb, ub] = window[static_cast<std::size_t>(k0 - 1 - k)];
    Zonotoped term = ops.m_delta * Zonotoped(stack_pair(xb, ub)) + ops.noise;
    for (Index j = 0; j < k; ++j) term = reduce_tube(ops.m_dk * term, config);
    sum = sum + term;
  }
  return sum;
}

StabilityReport assess_tube_stability(const TubeOperators& ops, const Zonotoped& state_set,
                                      const Zonotoped& input_set, Index steps, const TubeConfig& config) {
  StabilityReport rep;
  std::vector<Zonotoped> tube;
  try {
    tube = worst_case_tube_sequence(ops, state_set, input_set, steps, config);
  } catch (const TubeDivergent& e) {
    rep.diverged = true;
    rep.steps = e.step();
    rep.sup_radius = e.radius();
    return rep;
  }
  rep.steps = steps;
  VectorXd prev = VectorXd::Zero(ops.state_dim());
  for (const auto& z : tube) {
    const VectorXd r = interval_radius(z);
    rep.radii.push_back(r.maxCoeff());
    rep.sup_radius = std::max(rep.sup_radius, r.maxCoeff());
    rep.final_increment = (r - prev).lpNorm<Eigen::Infinity>();
    prev = r;
  }
  return rep;
}

void write_tube_jsonl(std::ostream& out, const std::vector<Zonotoped>& tube) {
  for (const auto& z : tube) out << Json(z).dump() << '\n';
}

std::vector<Zonotoped> read_tube_jsonl(std::istream& in) {
  std::vector<Zonotoped> tube;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      tube.push_back(Json::parse(line).get<Zonotoped>());
    } catch (const Json::exception& e) {
      throw FormatError("tube line " + std::to_string(tube.size() + 1) + ": " + e.what());
    }
  }
  return tube;
}

void write_tube_bounds_csv(std::ostream& out, const std::vector<Zonotoped>& tube) {
  const Index n = tube.empty() ? 0 : tube.front().dim();
  out << "step";
  for (Index i = 0; i < n; ++i) out << ",lower" << i + 1;
  for (Index i = 0; i < n; ++i) out << ",upper" << i + 1;
  out << '\n';
  for (std::size_t k = 0; k < tube.size(); ++k) {
    const auto h = interval_hull(tube[k]);
    out << k;
    for (Index i = 0; i < n; ++i) out << ',' << format_number(h.lower()(i));
    for (Index i = 0; i < n; ++i) out << ',' << format_number(h.upper()(i));
    out << '\n';
  }
}

}  // namespace ztube
