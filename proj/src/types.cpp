#include "more/types.hpp"

#include "more/error.hpp"

#include <string>

namespace more {

void Dataset::validate() const {
  if (inputs.rows() < 1) throw ValidationError("dataset is empty");
  if (targets.rows() != inputs.rows()) {
    throw ShapeError("dataset has " + std::to_string(inputs.rows()) + " inputs but " +
                     std::to_string(targets.rows()) + " targets");
  }
  if (inputs.cols() < 1 || targets.cols() < 1) throw ShapeError("dataset dimensions must be >= 1");
  if (!labels.empty() && static_cast<Index>(labels.size()) != inputs.rows()) {
    throw ShapeError("dataset has " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(inputs.rows()) + " samples");
  }
  if (!inputs.allFinite()) throw ValidationError("dataset inputs contain NaN or Inf");
  if (!targets.allFinite()) throw ValidationError("dataset targets contain NaN or Inf");
}

Dataset Dataset::subset(std::span<const Index> rows) const {
  Dataset out;
  out.inputs.resize(static_cast<Index>(rows.size()), inputs.cols());
  out.targets.resize(static_cast<Index>(rows.size()), targets.cols());
  for (Index i = 0; i < static_cast<Index>(rows.size()); ++i) {
    const Index r = rows[static_cast<std::size_t>(i)];
    if (r < 0 || r >= size()) throw IndexError("row " + std::to_string(r) + " out of range");
    out.inputs.row(i) = inputs.row(r);
    out.targets.row(i) = targets.row(r);
    if (!labels.empty()) out.labels.push_back(labels[static_cast<std::size_t>(r)]);
  }
  return out;
}

void MoreModel::validate() const {
  const Index K = num_experts();
  if (K < 1) throw ValidationError("model has no experts");
  if (gate.vectors.rows() != K) {
    throw ShapeError("gate has " + std::to_string(gate.vectors.rows()) + " vectors for " +
                     std::to_string(K) + " experts");
  }
  const Index k = input_dim();
  const Index m = output_dim();
  if (k < 1 || m < 1) throw ShapeError("model dimensions must be >= 1");
  if (!gate.vectors.allFinite()) throw ValidationError("gate parameters are not finite");
  for (Index j = 0; j < K; ++j) {
    const auto& e = experts[static_cast<std::size_t>(j)];
    if (e.weights.rows() != m || e.weights.cols() != k) {
      throw ShapeError("expert " + std::to_string(j) + " weights are " +
                       std::to_string(e.weights.rows()) + "x" + std::to_string(e.weights.cols()) +
                       ", expected " + std::to_string(m) + "x" + std::to_string(k));
    }
    if (e.log_variances.size() != m) {
      throw ShapeError("expert " + std::to_string(j) + " has " +
                       std::to_string(e.log_variances.size()) + " variances, expected " +
                       std::to_string(m));
    }
    if (!e.weights.allFinite() || !e.log_variances.allFinite()) {
      throw ValidationError("expert " + std::to_string(j) + " parameters are not finite");
    }
  }
}

MoreModel make_zero_model(Index num_experts, Index input_dim, Index output_dim) {
  MoreModel model;
  model.gate.vectors = Matrix::Zero(num_experts, input_dim);
  model.experts.assign(static_cast<std::size_t>(num_experts),
                       ExpertParams{Matrix::Zero(output_dim, input_dim), Vector::Zero(output_dim)});
  return model;
}

}  // namespace more
