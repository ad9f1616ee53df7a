#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>

namespace vecsac {

using Index = Eigen::Index;

/// Row-major dense matrix; one sample per row.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

using Rng = std::mt19937_64;

/// Fills `m` with independent standard normals.
template <typename Derived>
void fill_standard_normal(Eigen::MatrixBase<Derived>& m, Rng& rng) {
  std::normal_distribution<typename Derived::Scalar> normal(0, 1);
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = normal(rng);
}

template <typename Scalar>
Matrix<Scalar> standard_normal(Index rows, Index cols, Rng& rng) {
  Matrix<Scalar> m(rows, cols);
  fill_standard_normal(m, rng);
  return m;
}

/// [a | b] column concatenation of two row-aligned batches.
template <typename A, typename B>
Matrix<typename A::Scalar> hstack(const Eigen::MatrixBase<A>& a,
                                  const Eigen::MatrixBase<B>& b) {
  Matrix<typename A::Scalar> out(a.rows(), a.cols() + b.cols());
  out.leftCols(a.cols()) = a;
  out.rightCols(b.cols()) = b;
  return out;
}

}  // namespace vecsac
