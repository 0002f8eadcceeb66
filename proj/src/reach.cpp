#include "ztube/reach.hpp"

#include "ztube/membership.hpp"

#include <Eigen/SVD>

#include <istream>
#include <ostream>
#include <string>

namespace ztube {

using Eigen::MatrixXd;
using Eigen::VectorXd;

RankCertificate rank_certificate(const MatrixXd& stacked) {
  RankCertificate cert;
  cert.required = stacked.rows();
  if (stacked.size() == 0) return cert;
  Eigen::JacobiSVD<MatrixXd> svd(stacked);
  const VectorXd& s = svd.singularValues();
  cert.sigma_max = s(0);
  cert.sigma_min = s.size() < stacked.rows() ? 0.0 : s(s.size() - 1);
  for (Index i = 0; i < s.size(); ++i)
    if (s(i) > kRankTolerance * cert.sigma_max) ++cert.rank;
  return cert;
}

MatrixXd DataSet::stacked() const {
  MatrixXd p(state_dim() + input_dim(), samples());
  p << X_minus, U_minus;
  return p;
}

DataSet make_dataset(MatrixXd x_minus, MatrixXd x_plus, MatrixXd u_minus) {
  detail::require(x_minus.rows() == x_plus.rows(), "X- and X+ must have the same row count");
  detail::require(x_minus.cols() == x_plus.cols() && x_minus.cols() == u_minus.cols(),
                  "X-, X+ and U- must have the same column count");
  DataSet d{std::move(x_minus), std::move(x_plus), std::move(u_minus), {}};
  d.rank = rank_certificate(d.stacked());
  return d;
}

PlantModel::PlantModel(MatrixXd a, MatrixXd b, Zonotoped w) : A0(std::move(a)), B0(std::move(b)), noise(std::move(w)) {
  detail::require(A0.rows() == A0.cols(), "A0 must be square");
  detail::require(B0.rows() == A0.rows(), "B0 row count must equal the state dimension");
  detail::require(noise.dim() == A0.rows(), "noise dimension must equal the state dimension");
  if (!contains_point(noise, VectorXd::Zero(noise.dim())))
    throw std::invalid_argument("noise zonotope must contain the origin");
}

VectorXd PlantModel::step(const VectorXd& x, const VectorXd& u, const VectorXd& w) const {
  return A0 * x + B0 * u + w;
}

NoiseSampler::NoiseSampler(const Zonotoped& z, NoiseLaw law) : z_(z), law_(law) {
  if (law_ == NoiseLaw::vertices && z_.dim() <= kMaxVertexDimension && z_.num_generators() <= kMaxVertexGenerators)
    vertices_ = zonotope_vertices(z_);
}

VectorXd NoiseSampler::operator()(std::mt19937_64& rng) const {
  switch (law_) {
    case NoiseLaw::none:
      return VectorXd::Zero(z_.dim());
    case NoiseLaw::uniform:
      return sample_point(z_, rng);
    case NoiseLaw::vertices:
      break;
  }
  if (!vertices_.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, vertices_.size() - 1);
    return vertices_[pick(rng)];
  }
  std::bernoulli_distribution coin(0.5);
  VectorXd w = z_.center();
  for (Index j = 0; j < z_.num_generators(); ++j) w += (coin(rng) ? 1.0 : -1.0) * z_.generators().col(j);
  return w;
}

DataSet collect_trajectory(const PlantModel& plant, Index T, const VectorXd& x0, const InputLaw& input_law,
                           NoiseLaw noise_law, std::mt19937_64& rng) {
  const Index n = plant.state_dim(), m = plant.input_dim();
  detail::require(x0.size() == n, "x0 dimension must equal the state dimension");
  if (T < n + m) throw std::invalid_argument("T must be at least n + m");

  NoiseSampler noise(plant.noise, noise_law);
  std::normal_distribution<double> gauss(0.0, input_law.scale);
  std::uniform_real_distribution<double> unif(-input_law.scale, input_law.scale);

  MatrixXd xm(n, T), xp(n, T), um(m, T);
  VectorXd x = x0;
  for (Index t = 0; t < T; ++t) {
    VectorXd u = VectorXd::Zero(m);
    for (Index i = 0; i < m; ++i) {
      if (input_law.kind == InputLaw::Kind::gaussian) u(i) = gauss(rng);
      else if (input_law.kind == InputLaw::Kind::uniform) u(i) = unif(rng);
    }
    const VectorXd next = plant.step(x, u, noise(rng));
    xm.col(t) = x;
    um.col(t) = u;
    xp.col(t) = next;
    x = next;
  }
  DataSet d = make_dataset(std::move(xm), std::move(xp), std::move(um));
  if (!d.rank.full_row_rank())
    throw NotPersistentlyExciting("[X-; U-] has rank " + std::to_string(d.rank.rank) + ", need " +
                                  std::to_string(d.rank.required));
  return d;
}

MatrixXd right_pseudo_inverse(const MatrixXd& p) {
  if (p.size() == 0) return MatrixXd::Zero(p.cols(), p.rows());
  Eigen::JacobiSVD<MatrixXd> svd(p, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd& s = svd.singularValues();
  VectorXd inv = VectorXd::Zero(s.size());
  for (Index i = 0; i < s.size(); ++i)
    if (s(i) > kPinvCutoff * s(0)) inv(i) = 1.0 / s(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

MatrixZonotoped build_consistent_set(const DataSet& data, const Zonotoped& noise, bool reduce) {
  detail::require(noise.dim() == data.state_dim(), "noise dimension must equal the state dimension");
  if (!data.rank.full_row_rank())
    throw NotPersistentlyExciting("[X-; U-] has rank " + std::to_string(data.rank.rank) + ", need " +
                                  std::to_string(data.rank.required));
  const MatrixXd pinv = right_pseudo_inverse(data.stacked());
  const Index T = data.samples();

  const MatrixXd center = (data.X_plus - noise.center().replicate(1, T)) * pinv;
  std::vector<MatrixXd> gens;
  gens.reserve(static_cast<std::size_t>(noise.num_generators() * T));
  // Generator (j, k) is -g_j placed in column k, mapped through the pseudo-inverse.
  for (Index k = 0; k < T; ++k)
    for (Index j = 0; j < noise.num_generators(); ++j) gens.push_back(-noise.generators().col(j) * pinv.row(k));
  MatrixZonotoped md(center, gens);
  return reduce ? mz_reduce_order_box(md) : md;
}

BigInt binomial(long long a, long long b) {
  if (b < 0 || a < 0 || b > a) return 0;
  b = std::min(b, a - b);
  BigInt r = 1;
  for (long long i = 1; i <= b; ++i) r = r * (a - b + i) / i;
  return r;
}

BigInt minmax_vertex_bound(long long n, long long m, long long T, long long gamma_w, long long N) {
  if (n <= 0 || m <= 0 || T <= 0 || gamma_w <= 0 || N <= 0)
    throw std::invalid_argument("minmax_vertex_bound: all arguments must be positive");
  BigInt first = 0, second = 0;
  for (long long i = 0; i < n * (n + m); ++i) first += binomial(T * gamma_w - 1, i);
  for (long long i = 0; i < n * N; ++i) second += binomial(N * gamma_w - 1, i);
  return 2 * (first + second);
}

void write_dataset_csv(std::ostream& out, const DataSet& d) {
  const Index n = d.state_dim(), m = d.input_dim();
  std::string line;
  for (Index i = 0; i < n; ++i) line += (line.empty() ? "" : ",") + ("x" + std::to_string(i + 1));
  for (Index i = 0; i < m; ++i) line += ",u" + std::to_string(i + 1);
  for (Index i = 0; i < n; ++i) line += ",xnext" + std::to_string(i + 1);
  out << line << '\n';
  for (Index t = 0; t < d.samples(); ++t) {
    line.clear();
    for (Index i = 0; i < n; ++i) line += (i ? "," : "") + format_number(d.X_minus(i, t));
    for (Index i = 0; i < m; ++i) line += "," + format_number(d.U_minus(i, t));
    for (Index i = 0; i < n; ++i) line += "," + format_number(d.X_plus(i, t));
    out << line << '\n';
  }
}

DataSet read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("dataset csv: missing header");
  Index n = 0, m = 0, np = 0;
  for (const auto& name : split_csv_line(line)) {
    if (name.rfind("xnext", 0) == 0) ++np;
    else if (name.rfind("x", 0) == 0) ++n;
    else if (name.rfind("u", 0) == 0) ++m;
    else throw FormatError("dataset csv: unexpected column '" + name + "'");
  }
  if (n == 0 || n != np) throw FormatError("dataset csv: header must have matching x and xnext columns");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    if (static_cast<Index>(fields.size()) != 2 * n + m)
      throw FormatError("dataset csv: row " + std::to_string(rows.size() + 1) + " has the wrong field count");
    std::vector<double> row;
    for (const auto& f : fields) row.push_back(parse_number(f));
    rows.push_back(std::move(row));
  }
  const Index T = static_cast<Index>(rows.size());
  MatrixXd xm(n, T), um(m, T), xp(n, T);
  for (Index t = 0; t < T; ++t) {
    const auto& r = rows[static_cast<std::size_t>(t)];
    for (Index i = 0; i < n; ++i) xm(i, t) = r[static_cast<std::size_t>(i)];
    for (Index i = 0; i < m; ++i) um(i, t) = r[static_cast<std::size_t>(n + i)];
    for (Index i = 0; i < n; ++i) xp(i, t) = r[static_cast<std::size_t>(n + m + i)];
  }
  return make_dataset(std::move(xm), std::move(xp), std::move(um));
}

void to_json(Json& j, const DataSet& d) {
  j = Json{{"X_minus", matrix_to_json(d.X_minus)},
           {"X_plus", matrix_to_json(d.X_plus)},
           {"U_minus", matrix_to_json(d.U_minus)},
           {"rank", {{"rank", d.rank.rank},
                     {"required", d.rank.required},
                     {"sigma_min", d.rank.sigma_min},
                     {"sigma_max", d.rank.sigma_max}}}};
}

void from_json(const Json& j, DataSet& d) {
  for (const char* key : {"X_minus", "X_plus", "U_minus"})
    if (!j.contains(key)) throw FormatError(std::string("dataset: missing '") + key + "'");
  d = make_dataset(matrix_from_json(j.at("X_minus")), matrix_from_json(j.at("X_plus")),
                   matrix_from_json(j.at("U_minus")));
}

}  // namespace ztube
