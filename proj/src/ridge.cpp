#include "more/ridge.hpp"

#include "more/error.hpp"

#include <Eigen/QR>

#include <cmath>
#include <string>

namespace more {

Matrix weighted_ridge_fit(const Matrix& inputs, const Matrix& targets, const Vector& weights,
                          double lambda) {
  const Index N = inputs.rows();
  const Index k = inputs.cols();
  if (N < 1) throw ValidationError("ridge_fit needs at least one sample");
  if (targets.rows() != N || weights.size() != N) {
    throw ShapeError("ridge_fit: inputs, targets and weights disagree on sample count");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ValidationError("ridge_fit: lambda must be finite and >= 0");
  }
  if ((weights.array() < 0.0).any()) throw ValidationError("ridge_fit: negative sample weight");

  const Vector root_w = weights.array().sqrt().matrix();
  Matrix design(N + k, k);
  design.topRows(N) = root_w.asDiagonal() * inputs;
  design.bottomRows(k) = std::sqrt(lambda) * Matrix::Identity(k, k);
  Matrix rhs = Matrix::Zero(N + k, targets.cols());
  rhs.topRows(N) = root_w.asDiagonal() * targets;

  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  if (qr.rank() < k) {
    throw IllConditionedError("ridge system is rank deficient (rank " + std::to_string(qr.rank()) +
                              " < " + std::to_string(k) + "); use lambda > 0");
  }
  return qr.solve(rhs).transpose();
}

Matrix ridge_fit(const Matrix& inputs, const Matrix& targets, double lambda) {
  return weighted_ridge_fit(inputs, targets, Vector::Ones(inputs.rows()), lambda);
}

}  // namespace more
