#include "ztube/gains.hpp"

#include "ztube/lmi.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ztube {

using Eigen::MatrixXd;
using Eigen::VectorXd;

ProbSpec::ProbSpec(double eps, double del) : epsilon(eps), delta(del) { validate(); }

void ProbSpec::validate() const {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("epsilon must lie in (0, 1)");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
}

std::int64_t verification_sample_size(const ProbSpec& spec) {
  spec.validate();
  // log1p keeps ln(1/(1-eps)) accurate for small eps.
  const double n = std::log(1.0 / spec.delta) / -std::log1p(-spec.epsilon);
  return static_cast<std::int64_t>(std::ceil(n - 1e-12 * n));
}

double synthesis_vc_dimension(Index n, Index m) {
  const double nn = static_cast<double>(n);
  return 2.0 * nn * static_cast<double>(m) * std::log2(2.0 * std::numbers::e * nn * nn * (nn + 1.0));
}

std::int64_t synthesis_sample_size(const ProbSpec& spec, Index n, Index m) {
  spec.validate();
  if (n < 1 || m < 1) throw std::invalid_argument("synthesis_sample_size: n and m must be positive");
  const double d = synthesis_vc_dimension(n, m);
  const double v = 5.0 / spec.epsilon * (std::log(4.0 / spec.delta) + d * std::log(40.0 / spec.epsilon));
  return static_cast<std::int64_t>(std::ceil(v - 1e-12 * v));
}

double spectral_radius(const MatrixXd& m) {
  detail::require(m.rows() == m.cols(), "spectral_radius: matrix must be square");
  if (m.size() == 0) return 0.0;
  Eigen::EigenSolver<MatrixXd> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

ModelSample split_model(const MatrixXd& ab) {
  const Index n = ab.rows();
  detail::require(ab.cols() >= n, "split_model: need at least n columns");
  return {ab.leftCols(n), ab.rightCols(ab.cols() - n)};
}

ModelSample sample_model(const MatrixZonotoped& m, std::mt19937_64& rng) { return split_model(sample_member(m, rng)); }

namespace {

double closed_loop_radius(const ModelSample& s, const MatrixXd& K) { return spectral_radius(s.A + s.B * K); }

void check_gain_shape(const MatrixXd& K, const MatrixZonotoped& m) {
  const Index n = m.rows();
  detail::require(m.cols() > n, "gain: matrix zonotope must have n + m columns");
  detail::require(K.rows() == m.cols() - n && K.cols() == n, "gain: K must be m x n");
}

}  // namespace

VerificationResult verify_gain_with_seed(const MatrixXd& K, const MatrixZonotoped& m, const ProbSpec& spec,
                                         std::uint64_t batch_seed) {
  check_gain_shape(K, m);
  const std::int64_t N = verification_sample_size(spec);
  std::mt19937_64 rng(batch_seed);
  // Draw the whole batch first so the outcome does not depend on evaluation order.
  std::vector<ModelSample> batch;
  batch.reserve(static_cast<std::size_t>(N));
  for (std::int64_t i = 0; i < N; ++i) batch.push_back(sample_model(m, rng));

  VerificationResult out;
  double worst = 0.0;
  for (std::int64_t i = 0; i < N; ++i) {
    const double rho = closed_loop_radius(batch[static_cast<std::size_t>(i)], K);
    if (!(rho < 1.0)) {
      out.rejection = GainRejection{i, batch[static_cast<std::size_t>(i)], rho};
      return out;
    }
    worst = std::max(worst, rho);
  }
  GainCertificate c;
  c.K = K;
  c.num_samples = N;
  c.spec = spec;
  c.max_spectral_radius = worst;
  c.batch_seed = batch_seed;
  out.certificate = std::move(c);
  return out;
}

VerificationResult verify_gain(const MatrixXd& K, const MatrixZonotoped& m, const ProbSpec& spec, std::mt19937_64& rng) {
  return verify_gain_with_seed(K, m, spec, rng());
}

double lyapunov_decrease(const ModelSample& model, const MatrixXd& K, const MatrixXd& P) {
  const MatrixXd acl = model.A + model.B * K;
  const MatrixXd d = acl.transpose() * P * acl - P;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (d + d.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

double empirical_violation_rate(const MatrixXd& K, const MatrixZonotoped& m, std::int64_t count, std::uint64_t seed) {
  check_gain_shape(K, m);
  if (count <= 0) return 0.0;
  std::mt19937_64 rng(seed);
  std::int64_t bad = 0;
  for (std::int64_t i = 0; i < count; ++i)
    if (!(closed_loop_radius(sample_model(m, rng), K) < 1.0)) ++bad;
  return static_cast<double>(bad) / static_cast<double>(count);
}

namespace {

constexpr double kLyapunovMargin = 1e-9;

struct LyapunovLayout {
  Index n, m;
  Index sym() const { return n * (n + 1) / 2; }
  Index size() const { return sym() + m * n; }

  MatrixXd x_basis(Index k) const {
    MatrixXd e = MatrixXd::Zero(n, n);
    Index idx = 0;
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i <= j; ++i, ++idx)
        if (idx == k) {
          e(i, j) = 1.0;
          e(j, i) = 1.0;
        }
    return e;
  }

  MatrixXd x_of(const VectorXd& y) const {
    MatrixXd x = MatrixXd::Zero(n, n);
    for (Index k = 0; k < sym(); ++k) x += y(k) * x_basis(k);
    return x;
  }

  MatrixXd z_of(const VectorXd& y) const { return Eigen::Map<const MatrixXd>(y.data() + sym(), m, n); }
};

LmiBlock lyapunov_block(const LyapunovLayout& lay, const ModelSample& s) {
  const Index n = lay.n;
  LmiBlock blk;
  blk.constant = MatrixXd::Zero(2 * n, 2 * n);
  for (Index k = 0; k < lay.sym(); ++k) {
    const MatrixXd e = lay.x_basis(k);
    MatrixXd f(2 * n, 2 * n);
    const MatrixXd ae = s.A * e;
    f << e, ae, ae.transpose(), e;
    blk.coefficients.push_back(std::move(f));
  }
  for (Index c = 0; c < n; ++c)
    for (Index r = 0; r < lay.m; ++r) {
      MatrixXd e = MatrixXd::Zero(lay.m, n);
      e(r, c) = 1.0;
      const MatrixXd be = s.B * e;
      MatrixXd f = MatrixXd::Zero(2 * n, 2 * n);
      f.topRightCorner(n, n) = be;
      f.bottomLeftCorner(n, n) = be.transpose();
      blk.coefficients.push_back(std::move(f));
    }
  return blk;
}

}  // namespace

GainCertificate synthesize_gain(const MatrixZonotoped& m, const ProbSpec& spec, std::mt19937_64& rng,
                                const SynthesisSettings& settings) {
  const Index n = m.rows();
  detail::require(m.cols() > n, "synthesize_gain: matrix zonotope must have n + m columns");
  const Index mi = m.cols() - n;
  const std::int64_t N = synthesis_sample_size(spec, n, mi);
  const std::uint64_t seed = rng();

  std::mt19937_64 draw(seed);
  std::vector<ModelSample> models;
  models.reserve(static_cast<std::size_t>(N));
  for (std::int64_t i = 0; i < N; ++i) models.push_back(sample_model(m, draw));

  const LyapunovLayout lay{n, mi};
  LmiProblem prob;
  prob.num_variables = lay.size();
  // tr X <= n and |Z_ij| <= bound.
  prob.ineq_matrix = MatrixXd::Zero(1 + 2 * mi * n, lay.size());
  prob.ineq_rhs = VectorXd::Constant(1 + 2 * mi * n, settings.gain_bound);
  {
    Index idx = 0;
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i <= j; ++i, ++idx)
        if (i == j) prob.ineq_matrix(0, idx) = 1.0;
    prob.ineq_rhs(0) = static_cast<double>(n);
    for (Index k = 0; k < mi * n; ++k) {
      prob.ineq_matrix(1 + 2 * k, lay.sym() + k) = 1.0;
      prob.ineq_matrix(2 + 2 * k, lay.sym() + k) = -1.0;
    }
  }
  VectorXd y0 = VectorXd::Zero(lay.size());
  {
    Index idx = 0;
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i <= j; ++i, ++idx)
        if (i == j) y0(idx) = 0.9;
  }

  std::vector<char> enforced(models.size(), 0);
  const std::int64_t first = std::min<std::int64_t>(N, settings.sample_cap);
  for (std::int64_t i = 0; i < first; ++i) {
    enforced[static_cast<std::size_t>(i)] = 1;
    prob.blocks.push_back(lyapunov_block(lay, models[static_cast<std::size_t>(i)]));
  }

  MatrixXd K, P;
  for (int round = 0;; ++round) {
    const LmiResult res = maximize_lmi_margin(prob, y0);
    if (!(res.margin > kLyapunovMargin))
      throw SynthesisInfeasible("sampled Lyapunov LMIs are infeasible (margin " + std::to_string(res.margin) +
                                "); the models may admit no common stabilizing gain");
    const MatrixXd x = lay.x_of(res.y);
    const MatrixXd xinv = x.llt().solve(MatrixXd::Identity(n, n));
    K = lay.z_of(res.y) * xinv;
    P = 0.5 * (xinv + xinv.transpose());

    std::vector<std::pair<double, std::size_t>> violators;
    for (std::size_t i = 0; i < models.size(); ++i) {
      const double dec = lyapunov_decrease(models[i], K, P);
      if (dec > -kLyapunovMargin) violators.emplace_back(dec, i);
    }
    if (violators.empty()) break;
    if (round >= settings.refinement_rounds)
      throw SynthesisInfeasible(std::to_string(violators.size()) +
                                " drawn models violate the Lyapunov decrease after refinement");
    std::sort(violators.rbegin(), violators.rend());
    const std::size_t add = std::min<std::size_t>(violators.size(), static_cast<std::size_t>(settings.sample_cap));
    for (std::size_t k = 0; k < add; ++k) {
      enforced[violators[k].second] = 1;
      prob.blocks.push_back(lyapunov_block(lay, models[violators[k].second]));
    }
  }

  auto verified = verify_gain(K, m, spec, rng);
  if (!verified)
    throw SynthesisInfeasible("synthesized gain failed verification: spectral radius " +
                              std::to_string(verified.rejection->spectral_radius) + " at sample " +
                              std::to_string(verified.rejection->sample_index));
  GainCertificate c = std::move(*verified.certificate);
  c.lyapunov_P = P;
  c.synthesis_samples = N;
  c.synthesis_enforced = static_cast<std::int64_t>(prob.blocks.size());
  c.synthesis_seed = seed;
  return c;
}

void to_json(Json& j, const GainCertificate& c) {
  j = Json{{"K", matrix_to_json(c.K)},
           {"epsilon", c.spec.epsilon},
           {"delta", c.spec.delta},
           {"num_samples", c.num_samples},
           {"max_spectral_radius", c.max_spectral_radius},
           {"batch_seed", c.batch_seed}};
  if (c.lyapunov_P) j["lyapunov_P"] = matrix_to_json(*c.lyapunov_P);
  if (c.synthesis_samples > 0) {
    j["synthesis_samples"] = c.synthesis_samples;
    j["synthesis_enforced"] = c.synthesis_enforced;
    j["synthesis_seed"] = c.synthesis_seed;
  }
}

void from_json(const Json& j, GainCertificate& c) {
  for (const char* key : {"K", "epsilon", "delta", "num_samples", "max_spectral_radius", "batch_seed"})
    if (!j.contains(key)) throw FormatError(std::string("gain certificate: missing '") + key + "'");
  c = GainCertificate{};
  c.K = matrix_from_json(j.at("K"));
  c.spec = ProbSpec(j.at("epsilon").get<double>(), j.at("delta").get<double>());
  c.num_samples = j.at("num_samples").get<std::int64_t>();
  c.max_spectral_radius = j.at("max_spectral_radius").get<double>();
  c.batch_seed = j.at("batch_seed").get<std::uint64_t>();
  if (j.contains("lyapunov_P")) c.lyapunov_P = matrix_from_json(j.at("lyapunov_P"));
  c.synthesis_samples = j.value("synthesis_samples", std::int64_t{0});
  c.synthesis_enforced = j.value("synthesis_enforced", std::int64_t{0});
  c.synthesis_seed = j.value("synthesis_seed", std::uint64_t{0});
}

}  // namespace ztube
