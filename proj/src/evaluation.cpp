#include "more/evaluation.hpp"

#include "more/core_model.hpp"
#include "more/error.hpp"
#include "more/rng.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace more {

Vector r2_per_output(const Matrix& y_test, const Matrix& y_pred) {
  if (y_test.rows() != y_pred.rows() || y_test.cols() != y_pred.cols()) {
    throw ShapeError("r2: test and prediction shapes differ");
  }
  if (y_test.rows() < 2) throw ValidationError("r2 needs at least 2 samples");
  Vector out(y_test.cols());
  for (Index v = 0; v < y_test.cols(); ++v) {
    const double mean = y_test.col(v).mean();
    const double ss_res = (y_test.col(v) - y_pred.col(v)).squaredNorm();
    const double ss_tot = (y_test.col(v).array() - mean).square().sum();
    if (ss_tot > 0.0) {
      out(v) = 1.0 - ss_res / ss_tot;
    } else {
      out(v) = ss_res == 0.0 ? 1.0 : -std::numeric_limits<double>::infinity();
    }
  }
  return out;
}

double mean_defined_r2(const Vector& r2, Index* undefined) {
  double sum = 0.0;
  Index count = 0;
  for (Index v = 0; v < r2.size(); ++v) {
    if (std::isinf(r2(v)) && r2(v) < 0) continue;
    sum += r2(v);
    ++count;
  }
  if (undefined != nullptr) *undefined = r2.size() - count;
  return count == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(count);
}

std::vector<Index> FoldSpec::test_indices(int fold) const {
  std::vector<Index> out;
  for (std::size_t n = 0; n < assignments.size(); ++n) {
    if (assignments[n] == fold) out.push_back(static_cast<Index>(n));
  }
  return out;
}

std::vector<Index> FoldSpec::train_indices(int fold) const {
  std::vector<Index> out;
  for (std::size_t n = 0; n < assignments.size(); ++n) {
    if (assignments[n] != fold) out.push_back(static_cast<Index>(n));
  }
  return out;
}

std::vector<Index> FoldSpec::fold_sizes() const {
  std::vector<Index> sizes(static_cast<std::size_t>(n_folds), 0);
  for (int a : assignments) ++sizes[static_cast<std::size_t>(a)];
  return sizes;
}

FoldSpec make_folds(Index n_samples, int n_folds, std::uint64_t seed) {
  if (n_folds < 2) throw ValidationError("need at least 2 folds");
  if (n_samples < n_folds) {
    throw ValidationError("cannot split " + std::to_string(n_samples) + " samples into " +
                          std::to_string(n_folds) + " folds");
  }
  std::vector<Index> order(static_cast<std::size_t>(n_samples));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(seed);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    std::swap(order[i], order[rng.below(i + 1)]);
  }
  FoldSpec spec;
  spec.n_folds = n_folds;
  spec.seed = seed;
  spec.assignments.assign(order.size(), 0);
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    spec.assignments[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos % n_folds);
  }
  return spec;
}

std::string to_string(ModelKind kind) { return kind == ModelKind::more ? "more" : "ridge"; }

ModelKind parse_model_kind(const std::string& name) {
  if (name == "more") return ModelKind::more;
  if (name == "ridge") return ModelKind::ridge;
  throw ValidationError("unknown model kind '" + name + "' (expected more or ridge)");
}

std::uint64_t fold_train_seed(std::uint64_t base, int fold) {
  return derive_seed(base, 0x666f6c64ULL, static_cast<std::uint64_t>(fold));
}

EvalReport cross_validate(const Dataset& data, ModelKind kind, const FoldSpec& folds,
                          const TrainConfig& train_config, double ridge_lambda) {
  data.validate();
  if (static_cast<Index>(folds.assignments.size()) != data.size()) {
    throw ShapeError("fold assignments cover " + std::to_string(folds.assignments.size()) +
                     " samples, dataset has " + std::to_string(data.size()));
  }
  for (int a : folds.assignments) {
    if (a < 0 || a >= folds.n_folds) throw ValidationError("fold index out of range");
  }
  const auto sizes = folds.fold_sizes();
  for (int f = 0; f < folds.n_folds; ++f) {
    const Index n_train = data.size() - sizes[static_cast<std::size_t>(f)];
    if (sizes[static_cast<std::size_t>(f)] == 0) {
      throw ValidationError("fold " + std::to_string(f) + " is empty");
    }
    if (kind == ModelKind::more && n_train < train_config.num_experts) {
      throw ValidationError("fold " + std::to_string(f) + " leaves " + std::to_string(n_train) +
                            " training samples for " + std::to_string(train_config.num_experts) +
                            " experts");
    }
    if (n_train < 1) throw ValidationError("fold " + std::to_string(f) + " leaves no training data");
  }

  Matrix pooled(data.size(), data.output_dim());
  EvalReport report;
  report.model_tag = to_string(kind);
  report.fold_sizes = sizes;
  for (int f = 0; f < folds.n_folds; ++f) {
    const auto train_idx = folds.train_indices(f);
    const auto test_idx = folds.test_indices(f);
    const Dataset train = data.subset(train_idx);
    const Dataset test = data.subset(test_idx);
    Matrix pred;
    if (kind == ModelKind::ridge) {
      pred = test.inputs * ridge_fit(train.inputs, train.targets, ridge_lambda).transpose();
    } else {
      TrainConfig cfg = train_config;
      cfg.seed = fold_train_seed(train_config.seed, f);
      pred = predict_batch(fit(train, cfg).model, test.inputs);
    }
    for (std::size_t i = 0; i < test_idx.size(); ++i) {
      pooled.row(test_idx[i]) = pred.row(static_cast<Index>(i));
    }
    report.per_fold_mean_r2.push_back(test.size() >= 2
                                          ? mean_defined_r2(r2_per_output(test.targets, pred))
                                          : std::numeric_limits<double>::quiet_NaN());
  }
  report.per_output_r2 = r2_per_output(data.targets, pooled);
  report.mean_r2 = mean_defined_r2(report.per_output_r2, &report.undefined_outputs);
  return report;
}

}  // namespace more
