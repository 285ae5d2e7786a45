#include "more/em_trainer.hpp"

#include "more/core_model.hpp"
#include "more/error.hpp"
#include "more/ridge.hpp"
#include "more/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace more {
namespace {

constexpr double kStarvedResponsibility = 1e-12;
constexpr double kInitRidgeLambda = 1e-3;
constexpr int kKmeansIterations = 20;

// Model plus the per-sample terms the likelihood guard needs. Every update
// edits one block and refreshes only the cache that block touches.
struct State {
  MoreModel model;
  Matrix log_gates;      // N x K
  Matrix log_densities;  // N x K
  double loglik = 0.0;

  State(MoreModel m, const Dataset& data, int threads) : model(std::move(m)) {
    log_gates = log_gate_matrix(model.gate, data.inputs);
    log_densities = expert_log_density_matrix(model, data, threads);
    loglik = mixture_log_likelihood(log_gates, log_densities);
  }
};

void check_compatible(const MoreModel& model, const Dataset& data) {
  if (data.size() < 1) throw ValidationError("dataset is empty");
  if (data.input_dim() != model.input_dim() || data.output_dim() != model.output_dim()) {
    throw ShapeError("dataset is " + std::to_string(data.input_dim()) + " -> " +
                     std::to_string(data.output_dim()) + ", model is " +
                     std::to_string(model.input_dim()) + " -> " +
                     std::to_string(model.output_dim()));
  }
}

void check_resp(const MoreModel& model, const Dataset& data, const Responsibilities& resp) {
  check_compatible(model, data);
  if (resp.h.rows() != data.size() || resp.h.cols() != model.num_experts()) {
    throw ShapeError("responsibilities are " + std::to_string(resp.h.rows()) + "x" +
                     std::to_string(resp.h.cols()) + ", expected " + std::to_string(data.size()) +
                     "x" + std::to_string(model.num_experts()));
  }
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out = logits;
  out.colwise() -= log_sum_exp_rows(logits);
  return out.array().exp().matrix();
}

bool passes_guard(double delta, double threshold) {
  return std::isfinite(delta) && delta >= threshold;
}

struct BlockOutcome {
  bool accepted = false;
  double delta = 0.0;
};

BlockOutcome step_gate(State& state, const Dataset& data, const Matrix& h, double rate,
                       int inner_iterations, double threshold) {
  const double inv_n = 1.0 / static_cast<double>(data.size());
  GateParams proposal = state.model.gate;
  for (int t = 0; t < inner_iterations; ++t) {
    const Matrix g = log_gate_matrix(proposal, data.inputs).array().exp().matrix();
    proposal.vectors.noalias() += (rate * inv_n) * ((h - g).transpose() * data.inputs);
  }
  if (!proposal.vectors.allFinite()) return {false, -std::numeric_limits<double>::infinity()};
  Matrix log_gates = log_gate_matrix(proposal, data.inputs);
  const double delta = mixture_log_likelihood(log_gates, state.log_densities) - state.loglik;
  if (!passes_guard(delta, threshold)) return {false, delta};
  state.model.gate = std::move(proposal);
  state.log_gates = std::move(log_gates);
  state.loglik += delta;
  return {true, delta};
}

void commit_expert_column(State& state, Index j, Vector column, double delta) {
  state.log_densities.col(j) = column;
  state.loglik += delta;
}

double loglik_with_column(const State& state, Index j, const Vector& column) {
  Matrix densities = state.log_densities;
  densities.col(j) = column;
  return mixture_log_likelihood(state.log_gates, densities);
}

BlockOutcome step_expert(State& state, const Dataset& data, const Matrix& h, Index j, double rate,
                         int inner_iterations, double threshold, int threads) {
  auto& expert = state.model.experts[static_cast<std::size_t>(j)];
  const Vector hj = h.col(j);
  const double mass = hj.sum();
  if (mass < kStarvedResponsibility) return {true, 0.0};

  // Sufficient statistics: the ascent step only needs sum h x x^T and sum h y x^T.
  const Matrix weighted_inputs = hj.asDiagonal() * data.inputs;
  const Matrix sxx = data.inputs.transpose() * weighted_inputs;
  const Matrix syx = data.targets.transpose() * weighted_inputs;

  // Step along diag(sigma^2_j) dQ/dW_j / sum_n h_j(n): the responsibility-
  // weighted mean residual outer product.
  ExpertParams proposal = expert;
  for (int t = 0; t < inner_iterations; ++t) {
    proposal.weights.noalias() += (rate / mass) * (syx - proposal.weights * sxx);
  }
  if (!proposal.weights.allFinite()) return {false, -std::numeric_limits<double>::infinity()};
  Vector column = expert_log_density_column(proposal, data, threads);
  const double delta = loglik_with_column(state, j, column) - state.loglik;
  if (!passes_guard(delta, threshold)) return {false, delta};
  expert = std::move(proposal);
  commit_expert_column(state, j, std::move(column), delta);
  return {true, delta};
}

struct CovarianceOutcome {
  bool accepted = false;
  bool starved = false;
  double delta = 0.0;
};

CovarianceOutcome step_covariance(State& state, const Dataset& data, const Matrix& h, Index j,
                                  double variance_floor, double threshold, int threads) {
  auto& expert = state.model.experts[static_cast<std::size_t>(j)];
  const Vector hj = h.col(j);
  const double mass = hj.sum();
  if (mass < kStarvedResponsibility) return {false, true, 0.0};

  Matrix residual = data.targets;
  residual.noalias() -= data.inputs * expert.weights.transpose();
  const Vector variance = (residual.array().square().matrix().transpose() * hj) / mass;
  ExpertParams proposal = expert;
  proposal.log_variances = variance.array().max(variance_floor).log().matrix();
  if (!proposal.log_variances.allFinite()) {
    return {false, false, -std::numeric_limits<double>::infinity()};
  }
  Vector column = expert_log_density_column(proposal, data, threads);
  const double delta = loglik_with_column(state, j, column) - state.loglik;
  if (!passes_guard(delta, threshold)) return {false, false, delta};
  expert = std::move(proposal);
  commit_expert_column(state, j, std::move(column), delta);
  return {true, false, delta};
}

ExpertParams fit_weighted_expert(const Dataset& data, const Vector& weights,
                                 double variance_floor) {
  ExpertParams expert;
  expert.weights = weighted_ridge_fit(data.inputs, data.targets, weights, kInitRidgeLambda);
  Matrix residual = data.targets;
  residual.noalias() -= data.inputs * expert.weights.transpose();
  const double mass = weights.sum();
  Vector variance = (residual.array().square().matrix().transpose() * weights);
  if (mass > 0.0) variance /= mass;
  expert.log_variances = variance.array().max(variance_floor).log().matrix();
  return expert;
}

}  // namespace

std::string to_string(InitStrategy s) {
  switch (s) {
    case InitStrategy::random_responsibility:
      return "random_responsibility";
    case InitStrategy::kmeans_inputs:
      return "kmeans_inputs";
  }
  return "unknown";
}

InitStrategy parse_init_strategy(const std::string& name) {
  if (name == "random_responsibility") return InitStrategy::random_responsibility;
  if (name == "kmeans_inputs") return InitStrategy::kmeans_inputs;
  throw ValidationError("unknown init strategy '" + name + "'");
}

void TrainConfig::validate() const {
  if (num_experts < 1) throw ValidationError("num_experts must be >= 1");
  if (max_em_iterations < 1) throw ValidationError("max_em_iterations must be >= 1");
  if (!(convergence_tol > 0.0)) throw ValidationError("convergence_tol must be > 0");
  if (!(gate_learning_rate > 0.0) || !std::isfinite(gate_learning_rate)) {
    throw ValidationError("gate_learning_rate must be > 0");
  }
  if (!(expert_learning_rate > 0.0) || !std::isfinite(expert_learning_rate)) {
    throw ValidationError("expert_learning_rate must be > 0");
  }
  if (m_step_inner_iterations < 1) throw ValidationError("m_step_inner_iterations must be >= 1");
  if (!std::isfinite(discard_threshold)) throw ValidationError("discard_threshold must be finite");
  if (!(variance_floor > 0.0) || !std::isfinite(variance_floor)) {
    throw ValidationError("variance_floor must be > 0");
  }
  if (num_threads < 1) throw ValidationError("num_threads must be >= 1");
}

Responsibilities e_step(const MoreModel& model, const Dataset& data, int num_threads) {
  check_compatible(model, data);
  return {softmax_rows(log_gate_matrix(model.gate, data.inputs) +
                       expert_log_density_matrix(model, data, num_threads))};
}

double expected_complete_loglik(const MoreModel& model, const Dataset& data,
                                const Responsibilities& resp) {
  check_resp(model, data, resp);
  const Matrix terms =
      log_gate_matrix(model.gate, data.inputs) + expert_log_density_matrix(model, data);
  // Zero responsibility contributes nothing even where the log term is -inf.
  double total = 0.0;
  for (Index n = 0; n < terms.rows(); ++n) {
    for (Index j = 0; j < terms.cols(); ++j) {
      if (resp.h(n, j) != 0.0) total += resp.h(n, j) * terms(n, j);
    }
  }
  return total;
}

Matrix gate_gradient(const MoreModel& model, const Dataset& data, const Responsibilities& resp) {
  check_resp(model, data, resp);
  const Matrix g = log_gate_matrix(model.gate, data.inputs).array().exp().matrix();
  return (resp.h - g).transpose() * data.inputs;
}

Matrix expert_gradient(const MoreModel& model, const Dataset& data, const Responsibilities& resp,
                       Index expert) {
  if (expert < 0 || expert >= model.num_experts()) {
    throw IndexError("expert index " + std::to_string(expert) + " out of range [0, " +
                     std::to_string(model.num_experts()) + ")");
  }
  check_resp(model, data, resp);
  const auto& params = model.experts[static_cast<std::size_t>(expert)];
  Matrix residual = data.targets;
  residual.noalias() -= data.inputs * params.weights.transpose();
  const Vector inv_var = (-params.log_variances.array()).exp().matrix();
  return inv_var.asDiagonal() *
         (residual.transpose() * (resp.h.col(expert).asDiagonal() * data.inputs));
}

GateUpdate update_gate(const MoreModel& model, const Dataset& data, const Responsibilities& resp,
                       const TrainConfig& config) {
  config.validate();
  check_resp(model, data, resp);
  State state(model, data, config.num_threads);
  const auto outcome = step_gate(state, data, resp.h, config.gate_learning_rate,
                                 config.m_step_inner_iterations, config.discard_threshold);
  return {state.model.gate, outcome.accepted, outcome.delta};
}

ExpertsUpdate update_experts(const MoreModel& model, const Dataset& data,
                             const Responsibilities& resp, const TrainConfig& config) {
  config.validate();
  check_resp(model, data, resp);
  State state(model, data, config.num_threads);
  ExpertsUpdate out;
  for (Index j = 0; j < model.num_experts(); ++j) {
    const auto outcome =
        step_expert(state, data, resp.h, j, config.expert_learning_rate,
                    config.m_step_inner_iterations, config.discard_threshold, config.num_threads);
    out.accepted.push_back(outcome.accepted);
    out.delta_loglik.push_back(outcome.delta);
  }
  out.experts = state.model.experts;
  return out;
}

CovarianceUpdate update_covariances(const MoreModel& model, const Dataset& data,
                                    const Responsibilities& resp, const TrainConfig& config) {
  config.validate();
  check_resp(model, data, resp);
  State state(model, data, config.num_threads);
  CovarianceUpdate out;
  for (Index j = 0; j < model.num_experts(); ++j) {
    const auto outcome = step_covariance(state, data, resp.h, j, config.variance_floor,
                                         config.discard_threshold, config.num_threads);
    out.accepted.push_back(outcome.accepted);
    out.starved.push_back(outcome.starved);
    out.delta_loglik.push_back(outcome.delta);
  }
  for (const auto& e : state.model.experts) out.log_variances.push_back(e.log_variances);
  return out;
}

std::vector<Index> kmeans(const Matrix& points, Index clusters, int iterations,
                          std::uint64_t seed) {
  const Index N = points.rows();
  if (clusters < 1 || clusters > N) {
    throw ValidationError("kmeans needs 1 <= clusters <= points (" + std::to_string(clusters) +
                          " clusters, " + std::to_string(N) + " points)");
  }
  Rng rng(seed);
  Matrix centers(clusters, points.cols());

  // k-means++ seeding.
  centers.row(0) = points.row(static_cast<Index>(rng.below(static_cast<std::uint64_t>(N))));
  Vector nearest = (points.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (Index c = 1; c < clusters; ++c) {
    const double total = nearest.sum();
    Index pick = N - 1;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (Index n = 0; n < N; ++n) {
        acc += nearest(n);
        if (acc > target) {
          pick = n;
          break;
        }
      }
    } else {
      pick = static_cast<Index>(rng.below(static_cast<std::uint64_t>(N)));
    }
    centers.row(c) = points.row(pick);
    nearest = nearest.cwiseMin((points.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }

  std::vector<Index> assign(static_cast<std::size_t>(N), -1);
  Vector dist(N);
  for (int it = 0; it < iterations; ++it) {
    bool changed = false;
    for (Index n = 0; n < N; ++n) {
      Index best = 0;
      double best_d = (points.row(n) - centers.row(0)).squaredNorm();
      for (Index c = 1; c < clusters; ++c) {
        const double d = (points.row(n) - centers.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      dist(n) = best_d;
      if (assign[static_cast<std::size_t>(n)] != best) {
        assign[static_cast<std::size_t>(n)] = best;
        changed = true;
      }
    }

    std::vector<Index> counts(static_cast<std::size_t>(clusters), 0);
    for (Index a : assign) ++counts[static_cast<std::size_t>(a)];
    for (Index c = 0; c < clusters; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      Index far = -1;
      for (Index n = 0; n < N; ++n) {
        if (counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(n)])] < 2) continue;
        if (far < 0 || dist(n) > dist(far)) far = n;
      }
      --counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(far)])];
      assign[static_cast<std::size_t>(far)] = c;
      ++counts[static_cast<std::size_t>(c)];
      dist(far) = 0.0;
      changed = true;
    }

    centers.setZero();
    for (Index n = 0; n < N; ++n) centers.row(assign[static_cast<std::size_t>(n)]) += points.row(n);
    for (Index c = 0; c < clusters; ++c) {
      centers.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
    }
    if (!changed) break;
  }
  return assign;
}

MoreModel initialize_model(const Dataset& data, const TrainConfig& config) {
  config.validate();
  data.validate();
  const Index K = config.num_experts;
  if (data.size() < K) {
    throw ValidationError("need at least as many samples as experts (N=" +
                          std::to_string(data.size()) + ", K=" + std::to_string(K) + ")");
  }
  Matrix weights(data.size(), K);
  if (config.init_strategy == InitStrategy::kmeans_inputs) {
    const auto labels = kmeans(data.inputs, K, kKmeansIterations, derive_seed(config.seed, 1));
    weights.setZero();
    for (Index n = 0; n < data.size(); ++n) weights(n, labels[static_cast<std::size_t>(n)]) = 1.0;
  } else {
    // Dirichlet(1, ..., 1) rows: normalized Exponential(1) draws.
    Rng rng(derive_seed(config.seed, 2));
    for (Index n = 0; n < data.size(); ++n) {
      for (Index j = 0; j < K; ++j) weights(n, j) = rng.exponential();
      weights.row(n) /= weights.row(n).sum();
    }
  }
  MoreModel model;
  model.gate.vectors = Matrix::Zero(K, data.input_dim());
  for (Index j = 0; j < K; ++j) {
    model.experts.push_back(fit_weighted_expert(data, weights.col(j), config.variance_floor));
  }
  return model;
}

FitResult fit(const Dataset& data, const TrainConfig& config) {
  return fit_from(initialize_model(data, config), data, config);
}

FitResult fit_from(MoreModel initial, const Dataset& data, const TrainConfig& config) {
  config.validate();
  data.validate();
  initial.validate();
  check_compatible(initial, data);
  const Index K = initial.num_experts();
  if (data.size() < K) {
    throw ValidationError("need at least as many samples as experts (N=" +
                          std::to_string(data.size()) + ", K=" + std::to_string(K) + ")");
  }
  const int threads = config.num_threads;

  State state(std::move(initial), data, threads);
  TrainReport report;
  report.initial_loglik = state.loglik;
  if (!std::isfinite(state.loglik)) throw ValidationError("initial log-likelihood is not finite");

  auto adapt = [&](double& rate, bool accepted) {
    if (config.adaptive_learning_rate) rate *= accepted ? 1.5 : 0.5;
  };
  double gate_rate = config.gate_learning_rate;
  std::vector<double> expert_rate(static_cast<std::size_t>(K), config.expert_learning_rate);
  std::vector<bool> starved(static_cast<std::size_t>(K), false);

  for (int it = 0; it < config.max_em_iterations; ++it) {
    const double before = state.loglik;
    const Matrix h = softmax_rows(state.log_gates + state.log_densities);
    bool progressed = false;
    bool any_discarded = false;

    const auto gate = step_gate(state, data, h, gate_rate, config.m_step_inner_iterations,
                                config.discard_threshold);
    if (!gate.accepted) ++report.gate_updates_discarded;
    any_discarded |= !gate.accepted;
    progressed |= gate.accepted && gate.delta != 0.0;
    adapt(gate_rate, gate.accepted);

    for (Index j = 0; j < K; ++j) {
      auto& rate = expert_rate[static_cast<std::size_t>(j)];
      const auto e = step_expert(state, data, h, j, rate, config.m_step_inner_iterations,
                                 config.discard_threshold, threads);
      if (!e.accepted) ++report.expert_updates_discarded;
      any_discarded |= !e.accepted;
      progressed |= e.accepted && e.delta != 0.0;
      adapt(rate, e.accepted);
    }

    for (Index j = 0; j < K; ++j) {
      const auto c = step_covariance(state, data, h, j, config.variance_floor,
                                     config.discard_threshold, threads);
      if (c.starved) {
        starved[static_cast<std::size_t>(j)] = true;
      } else if (!c.accepted) {
        ++report.covariance_updates_discarded;
      }
      progressed |= c.accepted && c.delta != 0.0;
    }

    report.loglik_trace.push_back(state.loglik);
    report.iterations_run = it + 1;
    // A small change only counts when every gate/expert proposal went
    // through; after a discard the halved rate makes the next gain small
    // for the wrong reason. An untouched L is a stall either way.
    if (progressed && !any_discarded && std::abs(state.loglik - before) < config.convergence_tol) {
      report.converged = true;
      break;
    }
  }

  for (Index j = 0; j < K; ++j) {
    if (starved[static_cast<std::size_t>(j)]) report.starved_experts.push_back(j);
  }
  const double log_floor = std::log(config.variance_floor);
  for (const auto& e : state.model.experts) {
    report.variance_floor_hits += (e.log_variances.array() <= log_floor + 1e-12).count();
  }
  return {std::move(state.model), std::move(report)};
}

}  // namespace more
