#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/Dense>

namespace fednew {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Eigen::Index;
using VectorXd = Vector<double>;
using MatrixXd = Matrix<double>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void require_dim(Index got, Index want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string(what) + ": dimension " + std::to_string(got) +
                         " does not match expected " + std::to_string(want));
  }
}

namespace linalg {

/// Raised when a Cholesky pivot is not strictly positive (or not finite).
class FactorizationError : public std::runtime_error {
 public:
  FactorizationError(Index pivot, double value)
      : std::runtime_error("cholesky: non-positive pivot at index " + std::to_string(pivot) +
                           " (value " + std::to_string(value) + ")"),
        pivot_(pivot) {}

  Index pivot() const { return pivot_; }

 private:
  Index pivot_;
};

/// Lower-triangular Cholesky factor A = L L^T of a symmetric positive definite
/// matrix. Immutable once built; share freely across threads.
template <typename Scalar>
class SpdFactor {
 public:
  using LowerMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  SpdFactor() = default;

  template <typename Derived>
  static SpdFactor compute(const Eigen::MatrixBase<Derived>& a) {
    if (a.rows() != a.cols()) {
      throw DimensionError("cholesky: matrix is not square");
    }
    const Index d = a.rows();
    LowerMatrix l = LowerMatrix::Zero(d, d);
    for (Index j = 0; j < d; ++j) {
      const Scalar sym_jj = a(j, j);
      const Scalar pivot = sym_jj - l.row(j).head(j).squaredNorm();
      if (!(pivot > Scalar(0)) || !std::isfinite(static_cast<double>(pivot))) {
        throw FactorizationError(j, static_cast<double>(pivot));
      }
      const Scalar ljj = std::sqrt(pivot);
      l(j, j) = ljj;
      for (Index i = j + 1; i < d; ++i) {
        const Scalar sym_ij = (a(i, j) + a(j, i)) / Scalar(2);
        l(i, j) = (sym_ij - l.row(i).head(j).dot(l.row(j).head(j))) / ljj;
      }
    }
    SpdFactor f;
    f.lower_ = std::move(l);
    return f;
  }

  Index dim() const { return lower_.rows(); }
  bool empty() const { return lower_.size() == 0; }
  const LowerMatrix& lower() const { return lower_; }

  template <typename Derived>
  Vector<Scalar> solve(const Eigen::MatrixBase<Derived>& rhs) const {
    require_dim(rhs.size(), dim(), "solve");
    Vector<Scalar> z = lower_.template triangularView<Eigen::Lower>().solve(rhs);
    lower_.transpose().template triangularView<Eigen::Upper>().solveInPlace(z);
    return z;
  }

  Matrix<Scalar> reconstruct() const { return lower_ * lower_.transpose(); }

 private:
  LowerMatrix lower_;
};

template <typename Derived>
SpdFactor<typename Derived::Scalar> cholesky(const Eigen::MatrixBase<Derived>& a) {
  return SpdFactor<typename Derived::Scalar>::compute(a);
}

template <typename Scalar, typename Derived>
Vector<Scalar> solve(const SpdFactor<Scalar>& factor, const Eigen::MatrixBase<Derived>& rhs) {
  return factor.solve(rhs);
}

/// Mean of equally sized vectors, summed left to right in the order given
/// (callers pass them ordered by client id). Bit-reproducible.
template <typename Scalar>
Vector<Scalar> deterministic_mean(std::span<const Vector<Scalar>> vectors) {
  if (vectors.empty()) {
    throw std::invalid_argument("deterministic_mean: empty list");
  }
  Vector<Scalar> sum = vectors.front();
  for (std::size_t i = 1; i < vectors.size(); ++i) {
    require_dim(vectors[i].size(), sum.size(), "deterministic_mean");
    sum += vectors[i];
  }
  return sum / static_cast<Scalar>(vectors.size());
}

template <typename Scalar>
Matrix<Scalar> deterministic_mean(std::span<const Matrix<Scalar>> matrices) {
  if (matrices.empty()) {
    throw std::invalid_argument("deterministic_mean: empty list");
  }
  Matrix<Scalar> sum = matrices.front();
  for (std::size_t i = 1; i < matrices.size(); ++i) {
    require_dim(matrices[i].rows(), sum.rows(), "deterministic_mean");
    require_dim(matrices[i].cols(), sum.cols(), "deterministic_mean");
    sum += matrices[i];
  }
  return sum / static_cast<Scalar>(matrices.size());
}

template <typename Scalar>
Scalar deterministic_mean(std::span<const Scalar> values) {
  if (values.empty()) {
    throw std::invalid_argument("deterministic_mean: empty list");
  }
  Scalar sum = 0;
  for (Scalar v : values) sum += v;
  return sum / static_cast<Scalar>(values.size());
}

/// Largest eigenvalue magnitude of a symmetric matrix by power iteration,
/// started from the all-ones vector.
template <typename Derived>
typename Derived::Scalar spectral_norm(const Eigen::MatrixBase<Derived>& a, int iterations = 200,
                                       double tolerance = 1e-12) {
  using Scalar = typename Derived::Scalar;
  Vector<Scalar> v = Vector<Scalar>::Ones(a.cols()).normalized();
  Scalar estimate = 0;
  for (int it = 0; it < iterations; ++it) {
    Vector<Scalar> w = a * v;
    const Scalar norm = w.norm();
    if (norm == Scalar(0)) return Scalar(0);
    v = w / norm;
    if (std::abs(norm - estimate) <= tolerance * norm) return norm;
    estimate = norm;
  }
  return estimate;
}

}  // namespace linalg
}  // namespace fednew
