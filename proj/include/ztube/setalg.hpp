#pragma once

/**
 * @file setalg.hpp
 * @brief Zonotopes, matrix zonotopes and interval boxes.
 *
 * A zonotope is the affine image of the unit cube,
 *   Z = <c, G> = { c + G b : |b|_inf <= 1 },
 * and a matrix zonotope is the same construction over matrices,
 *   M = <C, {G_1..G_g}> = { C + sum_i b_i G_i : |b|_inf <= 1 }.
 *
 * All types are immutable values. Every operation is a free function that
 * returns a new set; all-zero generators are dropped on construction.
 */

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ztube {

using Index = Eigen::Index;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Raised when operand shapes are incompatible.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

template <typename Scalar>
MatrixX<Scalar> prune_zero_columns(const MatrixX<Scalar>& g) {
  std::vector<Index> keep;
  keep.reserve(static_cast<std::size_t>(g.cols()));
  for (Index j = 0; j < g.cols(); ++j) {
    if ((g.col(j).array() != Scalar(0)).any()) keep.push_back(j);
  }
  if (static_cast<Index>(keep.size()) == g.cols()) return g;
  MatrixX<Scalar> out(g.rows(), static_cast<Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) out.col(static_cast<Index>(k)) = g.col(keep[k]);
  return out;
}

}  // namespace detail

template <typename Scalar = double>
class Zonotope {
 public:
  using Vector = VectorX<Scalar>;
  using Matrix = MatrixX<Scalar>;

  Zonotope() = default;

  /// Singleton {center}.
  explicit Zonotope(Vector center) : center_(std::move(center)), generators_(center_.size(), 0) {}

  Zonotope(Vector center, const Matrix& generators) : center_(std::move(center)) {
    detail::require(generators.rows() == center_.size() || (generators.size() == 0 && generators.cols() == 0),
                    "Zonotope: generator rows must equal center dimension");
    if (generators.size() == 0)
      generators_ = Matrix(center_.size(), 0);
    else
      generators_ = detail::prune_zero_columns(generators);
  }

  const Vector& center() const { return center_; }
  const Matrix& generators() const { return generators_; }
  Index dim() const { return center_.size(); }
  Index num_generators() const { return generators_.cols(); }
  bool is_singleton() const { return generators_.cols() == 0; }

  /// Generator count over dimension.
  Scalar order() const { return dim() == 0 ? Scalar(0) : Scalar(num_generators()) / Scalar(dim()); }

  static Zonotope origin(Index n) { return Zonotope(Vector::Zero(n)); }

  /// Axis-aligned box <center, diag(radius)>.
  static Zonotope box(const Vector& center, const Vector& radius) {
    detail::require(center.size() == radius.size(), "Zonotope::box: center/radius size mismatch");
    return Zonotope(center, radius.cwiseAbs().asDiagonal().toDenseMatrix());
  }

 private:
  Vector center_;
  Matrix generators_;
};

template <typename Scalar = double>
class MatrixZonotope {
 public:
  using Matrix = MatrixX<Scalar>;

  MatrixZonotope() = default;

  explicit MatrixZonotope(Matrix center) : center_(std::move(center)) {}

  MatrixZonotope(Matrix center, const std::vector<Matrix>& generators) : center_(std::move(center)) {
    generators_.reserve(generators.size());
    for (const auto& g : generators) {
      detail::require(g.rows() == center_.rows() && g.cols() == center_.cols(),
                      "MatrixZonotope: every generator must have the shape of the center");
      if ((g.array() != Scalar(0)).any()) generators_.push_back(g);
    }
  }

  const Matrix& center() const { return center_; }
  const std::vector<Matrix>& generators() const { return generators_; }
  const Matrix& generator(std::size_t i) const { return generators_[i]; }
  Index rows() const { return center_.rows(); }
  Index cols() const { return center_.cols(); }
  Index num_generators() const { return static_cast<Index>(generators_.size()); }

  /// Member selected by the factor vector b (|b|_inf <= 1 is not checked).
  Matrix member(const VectorX<Scalar>& factors) const {
    detail::require(factors.size() == num_generators(), "MatrixZonotope::member: factor count mismatch");
    Matrix x = center_;
    for (std::size_t i = 0; i < generators_.size(); ++i) x += factors(static_cast<Index>(i)) * generators_[i];
    return x;
  }

  /// Column-stacked generators, one column per generator: vec(G_i).
  Matrix vectorized_generators() const {
    Matrix out(center_.size(), num_generators());
    for (std::size_t i = 0; i < generators_.size(); ++i)
      out.col(static_cast<Index>(i)) = generators_[i].reshaped();
    return out;
  }

 private:
  Matrix center_;
  std::vector<Matrix> generators_;
};

template <typename Scalar = double>
class IntervalBox {
 public:
  using Vector = VectorX<Scalar>;

  IntervalBox() = default;

  IntervalBox(Vector lower, Vector upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
    detail::require(lower_.size() == upper_.size(), "IntervalBox: bound size mismatch");
    if ((lower_.array() > upper_.array()).any())
      throw std::invalid_argument("IntervalBox: lower bound exceeds upper bound");
  }

  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  Index dim() const { return lower_.size(); }
  Vector center() const { return (lower_ + upper_) / Scalar(2); }
  Vector radius() const { return (upper_ - lower_) / Scalar(2); }

  bool contains(const Vector& p, Scalar tol = Scalar(0)) const {
    detail::require(p.size() == dim(), "IntervalBox::contains: dimension mismatch");
    return ((p.array() >= lower_.array() - tol) && (p.array() <= upper_.array() + tol)).all();
  }

  /// Smallest signed distance from p to a face; negative when p is outside.
  Scalar margin(const Vector& p) const {
    detail::require(p.size() == dim(), "IntervalBox::margin: dimension mismatch");
    if (dim() == 0) return Scalar(0);
    return std::min((p - lower_).minCoeff(), (upper_ - p).minCoeff());
  }

 private:
  Vector lower_;
  Vector upper_;
};

// ---------------------------------------------------------------------------
// Zonotope operations

template <typename Scalar>
Zonotope<Scalar> minkowski_sum(const Zonotope<Scalar>& a, const Zonotope<Scalar>& b) {
  detail::require(a.dim() == b.dim(), "minkowski_sum: dimension mismatch");
  MatrixX<Scalar> g(a.dim(), a.num_generators() + b.num_generators());
  g << a.generators(), b.generators();
  return Zonotope<Scalar>(a.center() + b.center(), g);
}

template <typename Scalar>
Zonotope<Scalar> operator+(const Zonotope<Scalar>& a, const Zonotope<Scalar>& b) {
  return minkowski_sum(a, b);
}

/// Translation by a point.
template <typename Scalar>
Zonotope<Scalar> operator+(const Zonotope<Scalar>& z, const VectorX<Scalar>& v) {
  detail::require(z.dim() == v.size(), "translate: dimension mismatch");
  return Zonotope<Scalar>(z.center() + v, z.generators());
}

template <typename Scalar>
Zonotope<Scalar> linear_map(const MatrixX<Scalar>& t, const Zonotope<Scalar>& z) {
  detail::require(t.cols() == z.dim(), "linear_map: matrix columns must equal zonotope dimension");
  return Zonotope<Scalar>(t * z.center(), t * z.generators());
}

template <typename Scalar>
Zonotope<Scalar> operator*(const MatrixX<Scalar>& t, const Zonotope<Scalar>& z) {
  return linear_map(t, z);
}

template <typename Scalar>
Zonotope<Scalar> scale(Scalar s, const Zonotope<Scalar>& z) {
  return Zonotope<Scalar>(s * z.center(), s * z.generators());
}

/// Scales the generators only; the center is kept.
template <typename Scalar>
Zonotope<Scalar> enlarge(const Zonotope<Scalar>& z, Scalar factor) {
  return Zonotope<Scalar>(z.center(), factor * z.generators());
}

/// { [a; b] : a in A, b in B }
template <typename Scalar>
Zonotope<Scalar> cartesian_product(const Zonotope<Scalar>& a, const Zonotope<Scalar>& b) {
  VectorX<Scalar> c(a.dim() + b.dim());
  c << a.center(), b.center();
  MatrixX<Scalar> g = MatrixX<Scalar>::Zero(c.size(), a.num_generators() + b.num_generators());
  g.topLeftCorner(a.dim(), a.num_generators()) = a.generators();
  g.bottomRightCorner(b.dim(), b.num_generators()) = b.generators();
  return Zonotope<Scalar>(c, g);
}

/// Per-coordinate half-width of the interval hull, sum_j |G_ij|.
template <typename Scalar>
VectorX<Scalar> interval_radius(const Zonotope<Scalar>& z) {
  if (z.num_generators() == 0) return VectorX<Scalar>::Zero(z.dim());
  return z.generators().cwiseAbs().rowwise().sum();
}

template <typename Scalar>
IntervalBox<Scalar> interval_hull(const Zonotope<Scalar>& z) {
  const VectorX<Scalar> r = interval_radius(z);
  return IntervalBox<Scalar>(z.center() - r, z.center() + r);
}

template <typename Scalar>
Zonotope<Scalar> to_zonotope(const IntervalBox<Scalar>& box) {
  return Zonotope<Scalar>::box(box.center(), box.radius());
}

/// Box method: replaces all generators by the interval hull's n axis generators.
template <typename Scalar>
Zonotope<Scalar> reduce_order_box(const Zonotope<Scalar>& z) {
  return Zonotope<Scalar>::box(z.center(), interval_radius(z));
}

/**
 * Reduces z to at most max_generators generators.
 *
 * The generators with the largest ||g||_1 - ||g||_inf are kept and the
 * remaining ones are replaced by the box of their interval hull, so the
 * result always contains z. With max_generators <= dim the whole zonotope is
 * boxed.
 */
template <typename Scalar>
Zonotope<Scalar> reduce_order(const Zonotope<Scalar>& z, Index max_generators) {
  const Index n = z.dim();
  const Index g = z.num_generators();
  if (g <= max_generators) return z;
  if (max_generators <= n) return reduce_order_box(z);

  const Index keep = max_generators - n;
  std::vector<Index> idx(static_cast<std::size_t>(g));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::vector<Scalar> score(static_cast<std::size_t>(g));
  for (Index j = 0; j < g; ++j) {
    const auto col = z.generators().col(j);
    score[static_cast<std::size_t>(j)] = col.template lpNorm<1>() - col.template lpNorm<Eigen::Infinity>();
  }
  std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) {
    return score[static_cast<std::size_t>(a)] > score[static_cast<std::size_t>(b)];
  });

  MatrixX<Scalar> out(n, keep + n);
  VectorX<Scalar> boxed = VectorX<Scalar>::Zero(n);
  for (Index k = 0; k < g; ++k) {
    const Index j = idx[static_cast<std::size_t>(k)];
    if (k < keep)
      out.col(k) = z.generators().col(j);
    else
      boxed += z.generators().col(j).cwiseAbs();
  }
  out.rightCols(n) = boxed.asDiagonal().toDenseMatrix();
  return Zonotope<Scalar>(z.center(), out);
}

template <typename Scalar, typename Rng>
VectorX<Scalar> sample_point(const Zonotope<Scalar>& z, Rng& rng) {
  std::uniform_real_distribution<Scalar> unit(Scalar(-1), Scalar(1));
  VectorX<Scalar> beta(z.num_generators());
  for (Index j = 0; j < beta.size(); ++j) beta(j) = unit(rng);
  return z.center() + z.generators() * beta;
}

// ---------------------------------------------------------------------------
// Matrix zonotope operations

/// Horizontal concatenation [A B] with independent factors for each block.
template <typename Scalar>
MatrixZonotope<Scalar> concatenate(const MatrixZonotope<Scalar>& a, const MatrixZonotope<Scalar>& b) {
  detail::require(a.rows() == b.rows(), "concatenate: row count mismatch");
  MatrixX<Scalar> c(a.rows(), a.cols() + b.cols());
  c << a.center(), b.center();
  std::vector<MatrixX<Scalar>> gens;
  gens.reserve(a.generators().size() + b.generators().size());
  for (const auto& g : a.generators()) {
    MatrixX<Scalar> m = MatrixX<Scalar>::Zero(c.rows(), c.cols());
    m.leftCols(a.cols()) = g;
    gens.push_back(std::move(m));
  }
  for (const auto& g : b.generators()) {
    MatrixX<Scalar> m = MatrixX<Scalar>::Zero(c.rows(), c.cols());
    m.rightCols(b.cols()) = g;
    gens.push_back(std::move(m));
  }
  return MatrixZonotope<Scalar>(c, gens);
}

/**
 * T-fold concatenation of a zonotope: { [w_1 ... w_T] : w_k in Z }.
 *
 * Every column carries its own copy of the factors, giving gamma * T
 * generators ordered column-major over (generator j, column k).
 */
template <typename Scalar>
MatrixZonotope<Scalar> concatenate_repeat(const Zonotope<Scalar>& z, Index columns) {
  detail::require(columns >= 0, "concatenate_repeat: negative column count");
  MatrixX<Scalar> c = z.center().replicate(1, columns);
  std::vector<MatrixX<Scalar>> gens;
  gens.reserve(static_cast<std::size_t>(z.num_generators() * columns));
  for (Index k = 0; k < columns; ++k) {
    for (Index j = 0; j < z.num_generators(); ++j) {
      MatrixX<Scalar> m = MatrixX<Scalar>::Zero(z.dim(), columns);
      m.col(k) = z.generators().col(j);
      gens.push_back(std::move(m));
    }
  }
  return MatrixZonotope<Scalar>(c, gens);
}

/// Left map { L X : X in M }.
template <typename Scalar>
MatrixZonotope<Scalar> mz_linear_map_left(const MatrixX<Scalar>& l, const MatrixZonotope<Scalar>& m) {
  detail::require(l.cols() == m.rows(), "mz_linear_map_left: dimension mismatch");
  std::vector<MatrixX<Scalar>> gens;
  gens.reserve(m.generators().size());
  for (const auto& g : m.generators()) gens.push_back(l * g);
  return MatrixZonotope<Scalar>(l * m.center(), gens);
}

/// Right map { X R : X in M }.
template <typename Scalar>
MatrixZonotope<Scalar> mz_linear_map_right(const MatrixZonotope<Scalar>& m, const MatrixX<Scalar>& r) {
  detail::require(r.rows() == m.cols(), "mz_linear_map_right: dimension mismatch");
  std::vector<MatrixX<Scalar>> gens;
  gens.reserve(m.generators().size());
  for (const auto& g : m.generators()) gens.push_back(g * r);
  return MatrixZonotope<Scalar>(m.center() * r, gens);
}

/// { X - C0 : X in M }
template <typename Scalar>
MatrixZonotope<Scalar> mz_shift(const MatrixZonotope<Scalar>& m, const MatrixX<Scalar>& c0) {
  detail::require(c0.rows() == m.rows() && c0.cols() == m.cols(), "mz_shift: shape mismatch");
  return MatrixZonotope<Scalar>(m.center() - c0, m.generators());
}

/// Scales generators only, keeping the center.
template <typename Scalar>
MatrixZonotope<Scalar> mz_enlarge(const MatrixZonotope<Scalar>& m, Scalar factor) {
  std::vector<MatrixX<Scalar>> gens;
  gens.reserve(m.generators().size());
  for (const auto& g : m.generators()) gens.push_back(factor * g);
  return MatrixZonotope<Scalar>(m.center(), gens);
}

/// Entrywise box: at most one single-entry generator per matrix position.
template <typename Scalar>
MatrixZonotope<Scalar> mz_reduce_order_box(const MatrixZonotope<Scalar>& m) {
  MatrixX<Scalar> radius = MatrixX<Scalar>::Zero(m.rows(), m.cols());
  for (const auto& g : m.generators()) radius += g.cwiseAbs();
  std::vector<MatrixX<Scalar>> gens;
  for (Index c = 0; c < m.cols(); ++c) {
    for (Index r = 0; r < m.rows(); ++r) {
      if (radius(r, c) == Scalar(0)) continue;
      MatrixX<Scalar> e = MatrixX<Scalar>::Zero(m.rows(), m.cols());
      e(r, c) = radius(r, c);
      gens.push_back(std::move(e));
    }
  }
  return MatrixZonotope<Scalar>(m.center(), gens);
}

/**
 * Over-approximation of { X v : X in M, v in Z }.
 *
 * With M = <C, {G_i}> and Z = <c, [g_1..g_k]> the product expands into
 *   C c + C g_j d_j + G_i c b_i + G_i g_j (b_i d_j),
 * and each cross factor b_i d_j is treated as an independent factor in
 * [-1, 1]. Exact whenever one of the operands is a singleton.
 */
template <typename Scalar>
Zonotope<Scalar> mz_times_zonotope(const MatrixZonotope<Scalar>& m, const Zonotope<Scalar>& z) {
  detail::require(m.cols() == z.dim(), "mz_times_zonotope: matrix columns must equal zonotope dimension");
  const Index n = m.rows();
  const Index gm = m.num_generators();
  const Index gz = z.num_generators();
  MatrixX<Scalar> g(n, gz + gm + gm * gz);
  g.leftCols(gz) = m.center() * z.generators();
  for (Index i = 0; i < gm; ++i) {
    const auto& gi = m.generator(static_cast<std::size_t>(i));
    g.col(gz + i) = gi * z.center();
    if (gz > 0) g.middleCols(gz + gm + i * gz, gz) = gi * z.generators();
  }
  return Zonotope<Scalar>(m.center() * z.center(), g);
}

template <typename Scalar>
Zonotope<Scalar> operator*(const MatrixZonotope<Scalar>& m, const Zonotope<Scalar>& z) {
  return mz_times_zonotope(m, z);
}

template <typename Scalar, typename Rng>
VectorX<Scalar> sample_factors(const MatrixZonotope<Scalar>& m, Rng& rng) {
  std::uniform_real_distribution<Scalar> unit(Scalar(-1), Scalar(1));
  VectorX<Scalar> beta(m.num_generators());
  for (Index j = 0; j < beta.size(); ++j) beta(j) = unit(rng);
  return beta;
}

/// Member drawn with factors uniform on [-1, 1]^gamma.
template <typename Scalar, typename Rng>
MatrixX<Scalar> sample_member(const MatrixZonotope<Scalar>& m, Rng& rng) {
  return m.member(sample_factors(m, rng));
}

using Zonotoped = Zonotope<double>;
using MatrixZonotoped = MatrixZonotope<double>;
using IntervalBoxd = IntervalBox<double>;

}  // namespace ztube
