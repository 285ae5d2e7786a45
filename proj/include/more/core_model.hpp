#pragma once

#include "more/types.hpp"

namespace more {

/// Softmax gate output g(x) for one input. Max-subtracted, so large logits
/// cannot overflow.
Vector gate_probabilities(const MoreModel& model, const Eigen::Ref<const Vector>& x);

/// log g_j(x^n) for every sample; N x K.
Matrix log_gate_matrix(const GateParams& gate, const Matrix& inputs);

/// log P(y | x, W_j, Sigma_j) for a diagonal-covariance Gaussian expert,
/// evaluated entirely in the log domain.
double expert_log_density(const ExpertParams& expert, const Eigen::Ref<const Vector>& x,
                          const Eigen::Ref<const Vector>& y);

/// log P(y^n | x^n, theta_j) for every sample and one expert; length N.
/// Rows are processed in fixed-size blocks so the result does not depend on
/// `num_threads`.
Vector expert_log_density_column(const ExpertParams& expert, const Dataset& data,
                                 int num_threads = 1);

/// expert_log_density_column for every expert; N x K.
Matrix expert_log_density_matrix(const MoreModel& model, const Dataset& data, int num_threads = 1);

/// Per-sample log p(y^n | x^n) given cached log gates and log densities.
Vector per_sample_log_likelihood(const Matrix& log_gates, const Matrix& log_densities);

/// Sum over samples of log sum_j g_j(x^n) P(y^n | x^n, theta_j).
double mixture_log_likelihood(const MoreModel& model, const Dataset& data, int num_threads = 1);

/// Same total from cached terms; samples are summed in index order.
double mixture_log_likelihood(const Matrix& log_gates, const Matrix& log_densities);

/// Gate-weighted mixture mean sum_j g_j(x) W_j x.
Vector predict(const MoreModel& model, const Eigen::Ref<const Vector>& x);

/// predict() for every row of `inputs`; N x m.
Matrix predict_batch(const MoreModel& model, const Matrix& inputs);

struct HardPrediction {
  Index expert = 0;
  Vector response;
};

/// The single most probable expert under the gate (lowest index on ties) and
/// its mean response.
HardPrediction hard_predict(const MoreModel& model, const Eigen::Ref<const Vector>& x);

/// Argmax gate index for each row of `inputs`.
std::vector<Index> hard_assignments(const MoreModel& model, const Matrix& inputs);

/// Row-wise log-sum-exp.
Vector log_sum_exp_rows(const Matrix& values);

}  // namespace more
