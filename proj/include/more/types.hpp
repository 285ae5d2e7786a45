#pragma once

#include <Eigen/Core>

#include <span>
#include <string>
#include <vector>

namespace more {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Paired stimulus features and responses. Row n of `inputs` (N x k) is
/// x^n, row n of `targets` (N x m) is y^n.
struct Dataset {
  Matrix inputs;
  Matrix targets;
  std::vector<std::string> labels;  // empty or one per sample

  Index size() const { return inputs.rows(); }
  Index input_dim() const { return inputs.cols(); }
  Index output_dim() const { return targets.cols(); }

  /// Throws ValidationError/ShapeError when the invariants do not hold.
  void validate() const;

  /// Rows `rows` in the given order, labels included.
  Dataset subset(std::span<const Index> rows) const;
};

/// One linear-Gaussian expert: mean W x, diagonal variances exp(log_variances).
struct ExpertParams {
  Matrix weights;        // m x k
  Vector log_variances;  // m

  Vector variances() const { return log_variances.array().exp().matrix(); }
};

/// Softmax gate; row j of `vectors` (K x k) is v_j.
struct GateParams {
  Matrix vectors;
};

struct MoreModel {
  std::vector<ExpertParams> experts;
  GateParams gate;

  Index num_experts() const { return static_cast<Index>(experts.size()); }
  Index input_dim() const { return gate.vectors.cols(); }
  Index output_dim() const { return experts.empty() ? 0 : experts.front().weights.rows(); }

  /// Checks shape consistency and finiteness of every parameter.
  void validate() const;
};

/// A model with K experts, zero weights and gate, and unit variances.
MoreModel make_zero_model(Index num_experts, Index input_dim, Index output_dim);

}  // namespace more
