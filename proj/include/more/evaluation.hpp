#pragma once

#include "more/em_trainer.hpp"
#include "more/ridge.hpp"
#include "more/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace more {

/// Predictive r^2 per output column: 1 - SS_res / SS_tot with the test-set
/// mean. A zero-variance output scores 1 when its residuals are zero too and
/// -infinity ("undefined") otherwise. Inputs are N x m with N >= 2.
Vector r2_per_output(const Matrix& y_test, const Matrix& y_pred);

/// Mean over entries that are not -infinity; sets `undefined` to how many
/// were skipped. NaN when nothing is defined.
double mean_defined_r2(const Vector& r2, Index* undefined = nullptr);

struct FoldSpec {
  int n_folds = 5;
  std::vector<int> assignments;  // fold index per sample
  std::uint64_t seed = 0;

  std::vector<Index> test_indices(int fold) const;
  std::vector<Index> train_indices(int fold) const;
  std::vector<Index> fold_sizes() const;
};

/// Seeded Fisher-Yates shuffle, then round-robin fold assignment.
FoldSpec make_folds(Index n_samples, int n_folds, std::uint64_t seed);

enum class ModelKind { more, ridge };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

struct EvalReport {
  std::string model_tag;
  Vector per_output_r2;
  double mean_r2 = 0.0;
  Index undefined_outputs = 0;
  std::vector<double> per_fold_mean_r2;  // NaN for folds too small to score
  std::vector<Index> fold_sizes;
};

/// Trains on each fold's complement, predicts the held-out fold, then scores
/// the pooled out-of-fold predictions against all targets.
EvalReport cross_validate(const Dataset& data, ModelKind kind, const FoldSpec& folds,
                          const TrainConfig& train_config, double ridge_lambda = 1.0);

/// Seed for the MoRE fit of one fold.
std::uint64_t fold_train_seed(std::uint64_t base, int fold);

}  // namespace more
