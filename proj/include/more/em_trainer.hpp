#pragma once

#include "more/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace more {

enum class InitStrategy { random_responsibility, kmeans_inputs };

std::string to_string(InitStrategy s);
InitStrategy parse_init_strategy(const std::string& name);

struct TrainConfig {
  Index num_experts = 12;
  int max_em_iterations = 200;
  double convergence_tol = 1e-6;      // absolute change in total log-likelihood
  double gate_learning_rate = 0.01;
  double expert_learning_rate = 0.01;
  int m_step_inner_iterations = 10;
  double discard_threshold = 0.0;     // proposals with delta loglik below this are dropped
  double variance_floor = 1e-6;
  std::uint64_t seed = 0;
  InitStrategy init_strategy = InitStrategy::kmeans_inputs;
  /// Scale learning rates between EM iterations: x1.5 after an accepted
  /// proposal, x0.5 after a discarded one. Only fit() uses this.
  bool adaptive_learning_rate = true;
  int num_threads = 1;

  void validate() const;
};

/// N x K posterior expert assignments h_j(n).
struct Responsibilities {
  Matrix h;
};

struct TrainReport {
  double initial_loglik = 0.0;
  std::vector<double> loglik_trace;  // one entry per completed EM iteration
  int gate_updates_discarded = 0;
  int expert_updates_discarded = 0;
  int covariance_updates_discarded = 0;
  bool converged = false;
  int iterations_run = 0;
  std::vector<Index> starved_experts;  // experts whose total responsibility vanished
  Index variance_floor_hits = 0;       // (expert, output) pairs clamped at the floor at the end
};

struct FitResult {
  MoreModel model;
  TrainReport report;
};

/// Posterior responsibilities, computed as a row softmax over
/// log g_j + log density. Independent of num_threads.
Responsibilities e_step(const MoreModel& model, const Dataset& data, int num_threads = 1);

/// Q = sum_n sum_j h_j(n) [log g_j(x^n) + log P(y^n | x^n, theta_j)].
double expected_complete_loglik(const MoreModel& model, const Dataset& data,
                                const Responsibilities& resp);

/// dQ/dv_j = sum_n (h_j(n) - g_j(x^n)) x^n; returned as K x k.
Matrix gate_gradient(const MoreModel& model, const Dataset& data, const Responsibilities& resp);

/// dQ/dW_j; row i is sum_n h_j(n) (y_i^n - w_{j,i}^T x^n) / sigma^2_{j,i} x^n. m x k.
Matrix expert_gradient(const MoreModel& model, const Dataset& data, const Responsibilities& resp,
                       Index expert);

struct GateUpdate {
  GateParams gate;
  bool accepted = false;
  double delta_loglik = 0.0;
};

struct ExpertsUpdate {
  std::vector<ExpertParams> experts;
  std::vector<bool> accepted;
  std::vector<double> delta_loglik;
};

struct CovarianceUpdate {
  std::vector<Vector> log_variances;
  std::vector<bool> accepted;
  std::vector<bool> starved;
  std::vector<double> delta_loglik;
};

/// Gradient-ascent proposal for the gate (m_step_inner_iterations steps at
/// gate_learning_rate), kept only if the mixture log-likelihood changes by
/// at least discard_threshold.
GateUpdate update_gate(const MoreModel& model, const Dataset& data, const Responsibilities& resp,
                       const TrainConfig& config);

/// Same scheme for each expert's weights in index order; each proposal is
/// judged with all previously accepted proposals already applied.
ExpertsUpdate update_experts(const MoreModel& model, const Dataset& data,
                             const Responsibilities& resp, const TrainConfig& config);

/// Closed-form responsibility-weighted residual variance per output,
/// floored, and guarded like the other updates. Experts with total
/// responsibility below 1e-12 are left unchanged and marked starved.
CovarianceUpdate update_covariances(const MoreModel& model, const Dataset& data,
                                    const Responsibilities& resp, const TrainConfig& config);

/// Starting model per config.init_strategy.
MoreModel initialize_model(const Dataset& data, const TrainConfig& config);

/// Generalized EM from initialize_model().
FitResult fit(const Dataset& data, const TrainConfig& config);

/// Generalized EM from a caller-supplied starting model.
FitResult fit_from(MoreModel initial, const Dataset& data, const TrainConfig& config);

/// Lloyd's k-means (k-means++ seeding) on the rows of `points`; returns a
/// cluster index per row. Empty clusters are refilled with the point
/// farthest from its centroid.
std::vector<Index> kmeans(const Matrix& points, Index clusters, int iterations, std::uint64_t seed);

}  // namespace more
